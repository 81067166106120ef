#pragma once

// Independent oracles for the test suite. Everything here works on concrete
// s-expression syntax and explicit finite structures; none of it calls into
// the library's term manager, grounding, or solvers. Agreement between these
// oracles and the library is what the tests certify.

#include <gmpxx.h>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qivc/util/sexpr.hpp"

namespace oracle {

using qivc::Sexpr;
using qivc::SexprReader;

// A value in a finite structure: bool, rational, enum constructor name, or
// index element (0-based id).
struct OVal {
  enum class K { B, Q, C, E } k = K::B;
  bool b = false;
  mpq_class q = 0;
  std::string c;
  int e = 0;

  static OVal vb(bool x) { return {K::B, x, 0, "", 0}; }
  static OVal vq(mpq_class x) { return {K::Q, false, std::move(x), "", 0}; }
  static OVal vc(std::string x) { return {K::C, false, 0, std::move(x), 0}; }
  static OVal ve(int x) { return {K::E, false, 0, "", x}; }

  bool operator==(const OVal& o) const {
    if (k != o.k) return false;
    switch (k) {
      case K::B: return b == o.b;
      case K::Q: return q == o.q;
      case K::C: return c == o.c;
      case K::E: return e == o.e;
    }
    return false;
  }
  bool operator!=(const OVal& o) const { return !(*this == o); }
  bool operator<(const OVal& o) const {
    if (k != o.k) return k < o.k;
    switch (k) {
      case K::B: return b < o.b;
      case K::Q: return q < o.q;
      case K::C: return c < o.c;
      case K::E: return e < o.e;
    }
    return false;
  }
};

// Finite structure: universe 0..universe-1, named scalars, arrays as tables,
// predicates as tuple sets, and which symbols are enum constructors.
struct OStruct {
  int universe = 1;
  std::map<std::string, OVal> scalars;
  std::map<std::string, std::vector<OVal>> arrays;
  std::map<std::string, std::set<std::vector<int>>> preds;
  std::set<std::string> ctors;

  // primed copies for transition evaluation
  const OStruct* next = nullptr;
};

class OracleFail : public std::runtime_error {
 public:
  explicit OracleFail(const std::string& m) : std::runtime_error("oracle: " + m) {}
};

inline bool numeral(const std::string& s) {
  if (s.empty()) return false;
  size_t i = s[0] == '-' ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); i++)
    if (!isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

class OracleEval {
 public:
  explicit OracleEval(const OStruct& m) : m_(m) {}

  bool truth(const Sexpr& e) {
    OVal v = eval(e);
    if (v.k != OVal::K::B) throw OracleFail("expected bool");
    return v.b;
  }

  OVal eval(const Sexpr& e) {
    if (e.is_atom) return atom(e.atom);
    if (e.size() == 0) throw OracleFail("empty list");
    const std::string& h = e[0].atom;
    if (h == "forall" || h == "exists") return quant(e, h == "forall");
    if (h == "next") {
      if (!m_.next) throw OracleFail("next without a next-state");
      const std::string& n = e[1].atom;
      auto it = m_.next->scalars.find(n);
      if (it != m_.next->scalars.end()) return it->second;
      throw OracleFail("next of unknown scalar " + n);
    }
    if (h == "select") {
      // (select a i) or (select (next a) i)
      OVal idx = eval(e[2]);
      if (idx.k != OVal::K::E) throw OracleFail("non-element index");
      const OStruct* src = &m_;
      std::string name;
      if (e[1].is_atom) {
        name = e[1].atom;
      } else if (e[1].head_is("next")) {
        if (!m_.next) throw OracleFail("next without a next-state");
        src = m_.next;
        name = e[1][1].atom;
      } else {
        throw OracleFail("bad select");
      }
      auto it = src->arrays.find(name);
      if (it == src->arrays.end()) throw OracleFail("unknown array " + name);
      if (idx.e < 0 || idx.e >= static_cast<int>(it->second.size()))
        throw OracleFail("index out of range");
      return it->second[idx.e];
    }
    std::vector<OVal> args;
    for (size_t i = 1; i < e.size(); i++) args.push_back(eval(e[i]));
    if (h == "and") {
      for (auto& a : args)
        if (!a.b) return OVal::vb(false);
      return OVal::vb(true);
    }
    if (h == "or") {
      for (auto& a : args)
        if (a.b) return OVal::vb(true);
      return OVal::vb(false);
    }
    if (h == "not") return OVal::vb(!args[0].b);
    if (h == "=>") {
      bool r = args.back().b;
      for (size_t i = args.size() - 1; i-- > 0;) r = !args[i].b || r;
      return OVal::vb(r);
    }
    if (h == "=") {
      for (size_t i = 0; i + 1 < args.size(); i++)
        if (norm(args[i]) != norm(args[i + 1])) return OVal::vb(false);
      return OVal::vb(true);
    }
    if (h == "distinct") {
      for (size_t i = 0; i < args.size(); i++)
        for (size_t j = i + 1; j < args.size(); j++)
          if (norm(args[i]) == norm(args[j])) return OVal::vb(false);
      return OVal::vb(true);
    }
    if (h == "<=") return OVal::vb(args[0].q <= args[1].q);
    if (h == "<") return OVal::vb(args[0].q < args[1].q);
    if (h == ">=") return OVal::vb(args[0].q >= args[1].q);
    if (h == ">") return OVal::vb(args[0].q > args[1].q);
    if (h == "+") {
      mpq_class s = 0;
      for (auto& a : args) s += a.q;
      return OVal::vq(s);
    }
    if (h == "-") {
      if (args.size() == 1) return OVal::vq(-args[0].q);
      return OVal::vq(args[0].q - args[1].q);
    }
    if (h == "*") return OVal::vq(args[0].q * args[1].q);
    // predicate application
    auto it = m_.preds.find(h);
    if (it != m_.preds.end()) {
      std::vector<int> tup;
      for (auto& a : args) {
        if (a.k != OVal::K::E) throw OracleFail("predicate over non-elements");
        tup.push_back(a.e);
      }
      return OVal::vb(it->second.count(tup) > 0);
    }
    throw OracleFail("unknown operator " + h);
  }

 private:
  const OStruct& m_;
  std::vector<std::pair<std::string, int>> bound_;

  // numerals may appear as Int or Real on either side; compare numerically
  static OVal norm(const OVal& v) { return v; }

  OVal atom(const std::string& s) {
    if (s == "true") return OVal::vb(true);
    if (s == "false") return OVal::vb(false);
    if (numeral(s)) return OVal::vq(mpq_class(s));
    for (auto it = bound_.rbegin(); it != bound_.rend(); ++it)
      if (it->first == s) return OVal::ve(it->second);
    if (auto it = m_.scalars.find(s); it != m_.scalars.end()) return it->second;
    if (m_.ctors.count(s)) return OVal::vc(s);
    throw OracleFail("unknown symbol " + s);
  }

  OVal quant(const Sexpr& e, bool is_forall) {
    const Sexpr& vars = e[1];
    size_t k = vars.size();
    std::vector<int> idx(k, 0);
    if (m_.universe <= 0) throw OracleFail("empty universe");
    for (;;) {
      for (size_t i = 0; i < k; i++) bound_.emplace_back(vars[i][0].atom, idx[i]);
      bool r = truth(e[2]);
      bound_.resize(bound_.size() - k);
      if (r != is_forall) return OVal::vb(!is_forall);
      size_t d = 0;
      for (; d < k; d++) {
        if (++idx[d] < m_.universe) break;
        idx[d] = 0;
      }
      if (d == k) return OVal::vb(is_forall);
    }
  }
};

inline bool oracle_truth(const std::string& formula_text, const OStruct& m) {
  SexprReader r(formula_text);
  Sexpr e;
  if (!r.next(e)) throw OracleFail("no formula");
  return OracleEval(m).truth(e);
}

}  // namespace oracle
