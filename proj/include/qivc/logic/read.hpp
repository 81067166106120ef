#pragma once

// S-expression to term translation for the shared SMT-LIB-style syntax.
// Used by the system-file parser, by the bundled solver's frontend, and by
// the session client when it parses model values and interpolants back.

#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "qivc/logic/ops.hpp"
#include "qivc/logic/term.hpp"
#include "qivc/util/error.hpp"
#include "qivc/util/sexpr.hpp"

namespace qivc {

struct SymbolEnv {
  std::map<std::string, SortId> sorts;
  std::map<std::string, Term> consts;
  std::map<std::string, uint32_t> funcs;
  std::map<std::string, Term> enum_lits;  // constructor name -> literal
  bool allow_next = false;

  void add_enum(TermManager& tm, SortId s) {
    const SortInfo& si = tm.sort(s);
    for (size_t i = 0; i < si.ctors.size(); i++) {
      auto [it, fresh] = enum_lits.emplace(si.ctors[i], tm.mk_enum_at(s, i));
      if (!fresh && it->second != tm.mk_enum_at(s, i))
        fail_input("constructor '" + si.ctors[i] + "' is declared by two enum sorts");
    }
  }
};

class TermReader {
 public:
  TermReader(TermManager& tm, const SymbolEnv& env) : tm_(tm), env_(env) {}

  Term read(const Sexpr& e) { return read_rec(e); }

  SortId read_sort(const Sexpr& e) {
    if (e.is_atom) {
      if (e.atom == "Bool") return tm_.bool_sort();
      if (e.atom == "Int") return tm_.int_sort();
      if (e.atom == "Real") return tm_.real_sort();
      auto it = env_.sorts.find(e.atom);
      if (it == env_.sorts.end()) err(e, "unknown sort '" + e.atom + "'");
      return it->second;
    }
    if (e.size() == 3 && e[0].is_atom && e[0].atom == "Array") {
      SortId idx = read_sort(e[1]);
      SortId elem = read_sort(e[2]);
      if (tm_.sort(idx).kind != SortKind::Index)
        err(e[1], "array index sort must be the declared index sort");
      return tm_.array_sort(idx, elem);
    }
    err(e, "malformed sort");
  }

 private:
  TermManager& tm_;
  const SymbolEnv& env_;
  std::vector<std::pair<std::string, Term>> scope_;

  [[noreturn]] void err(const Sexpr& e, const std::string& msg) {
    fail_input(msg + " at line " + std::to_string(e.line) + ", column " +
               std::to_string(e.col));
  }

  static bool is_numeral(const std::string& s) {
    if (s.empty()) return false;
    size_t i = (s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); i++)
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
  }

  // Integer numerals are read at Int sort; callers of numeric operations
  // retype literal operands when the other side is Real.
  void coerce(std::vector<Term>& args) {
    bool real = false;
    for (Term a : args) real |= tm_.sort_of(a) == tm_.real_sort();
    if (!real) return;
    for (Term& a : args)
      if (tm_.op(a) == Op::IntLit && tm_.sort_of(a) == tm_.int_sort())
        a = tm_.mk_num(tm_.payload(a), tm_.real_sort());
  }

  Term read_atom(const Sexpr& e) {
    const std::string& s = e.atom;
    if (s == "true") return tm_.mk_true();
    if (s == "false") return tm_.mk_false();
    if (is_numeral(s)) {
      errno = 0;
      long long v = std::strtoll(s.c_str(), nullptr, 10);
      if (errno != 0) err(e, "numeral out of range");
      return tm_.mk_int(v);
    }
    for (auto it = scope_.rbegin(); it != scope_.rend(); ++it)
      if (it->first == s) return it->second;
    if (auto it = env_.consts.find(s); it != env_.consts.end()) return it->second;
    if (auto it = env_.enum_lits.find(s); it != env_.enum_lits.end()) return it->second;
    err(e, "unknown symbol '" + s + "'");
  }

  Term read_rec(const Sexpr& e) {
    try {
      return read_unguarded(e);
    } catch (const Error& ex) {
      if (ex.kind == Error::Kind::Sort)
        err(e, std::string(ex.what()));
      throw;
    }
  }

  Term read_unguarded(const Sexpr& e) {
    if (e.is_atom) return read_atom(e);
    if (e.size() == 0) err(e, "empty application");
    if (!e[0].is_atom) err(e, "application head must be a symbol");
    const std::string& head = e[0].atom;

    if (head == "forall" || head == "exists") {
      if (e.size() != 3 || !e[1].is_list()) err(e, "malformed quantifier");
      std::vector<Term> vars;
      size_t opened = 0;
      for (const Sexpr& b : e[1].items) {
        if (!b.is_list() || b.size() != 2 || !b[0].is_atom)
          err(b, "malformed quantified variable");
        // '!' is reserved for generated names; accept only the canonical
        // bound-variable pattern itself (so printed terms reparse)
        if (b[0].atom.find('!') != std::string::npos &&
            !TermManager::is_canonical_name(b[0].atom))
          err(b[0], "variable names may not contain '!'");
        SortId s = read_sort(b[1]);
        if (tm_.sort(s).kind != SortKind::Index)
          err(b[1], "only index-sorted variables may be quantified");
        Term v = tm_.mk_var(b[0].atom, s);
        vars.push_back(v);
        scope_.emplace_back(b[0].atom, v);
        opened++;
      }
      Term body = read_rec(e[2]);
      scope_.resize(scope_.size() - opened);
      return head == "forall" ? tm_.mk_forall(vars, body) : tm_.mk_exists(vars, body);
    }

    if (head == "next") {
      if (!env_.allow_next) err(e, "(next ...) is only allowed in transition formulas");
      if (e.size() != 2 || !e[1].is_atom) err(e, "malformed (next NAME)");
      auto it = env_.consts.find(e[1].atom);
      if (it == env_.consts.end()) err(e[1], "unknown state variable '" + e[1].atom + "'");
      return tm_.mk_next(it->second);
    }

    std::vector<Term> args;
    for (size_t i = 1; i < e.size(); i++) args.push_back(read_rec(e[i]));

    if (head == "and") return tm_.mk_and(args);
    if (head == "or") return tm_.mk_or(args);
    if (head == "not") {
      if (args.size() != 1) err(e, "not takes one argument");
      return tm_.mk_not(args[0]);
    }
    if (head == "=>") {
      if (args.size() < 2) err(e, "=> takes at least two arguments");
      Term r = args.back();
      for (size_t i = args.size() - 1; i-- > 0;) r = tm_.mk_implies(args[i], r);
      return r;
    }
    if (head == "=") {
      if (args.size() < 2) err(e, "= takes at least two arguments");
      coerce(args);
      std::vector<Term> eqs;
      for (size_t i = 0; i + 1 < args.size(); i++)
        eqs.push_back(tm_.mk_eq(args[i], args[i + 1]));
      return tm_.mk_and(eqs);
    }
    if (head == "distinct") {
      coerce(args);
      return all_diff(tm_, args);
    }
    if (head == "<=" || head == "<" || head == ">=" || head == ">") {
      if (args.size() != 2) err(e, head + " takes two arguments");
      coerce(args);
      if (head == "<=") return tm_.mk_le(args[0], args[1]);
      if (head == "<") return tm_.mk_lt(args[0], args[1]);
      if (head == ">=") return tm_.mk_ge(args[0], args[1]);
      return tm_.mk_gt(args[0], args[1]);
    }
    if (head == "+") {
      coerce(args);
      return tm_.mk_add(args);
    }
    if (head == "-") {
      coerce(args);
      if (args.size() == 1) return tm_.mk_neg(args[0]);
      if (args.size() != 2) err(e, "- takes one or two arguments");
      return tm_.mk_sub(args[0], args[1]);
    }
    if (head == "*") {
      if (args.size() != 2) err(e, "* takes two arguments");
      coerce(args);
      if (tm_.op(args[0]) == Op::IntLit) return tm_.mk_mul(tm_.payload(args[0]), args[1]);
      if (tm_.op(args[1]) == Op::IntLit) return tm_.mk_mul(tm_.payload(args[1]), args[0]);
      err(e, "multiplication must have a constant factor");
    }
    if (head == "select") {
      if (args.size() != 2) err(e, "select takes two arguments");
      return tm_.mk_select(args[0], args[1]);
    }

    if (auto it = env_.funcs.find(head); it != env_.funcs.end())
      return tm_.mk_apply(it->second, args);

    // Uninterpreted constants applied to arguments read as array selection
    // when the constant is array-sorted and exactly one index is given.
    if (auto it = env_.consts.find(head); it != env_.consts.end()) {
      if (args.size() == 1 && tm_.sort(tm_.sort_of(it->second)).kind == SortKind::Array)
        return tm_.mk_select(it->second, args[0]);
    }
    err(e, "unknown operator '" + head + "'");
  }
};

}  // namespace qivc
