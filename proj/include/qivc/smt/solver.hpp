#pragma once

// Uniform solving interface over a shared term manager, with two backends:
// the in-process decision engine, and an external SMT-LIB solver driven over
// pipes. Callers declare their signature through the interface so the
// external backend can mirror it, then use push/assert/check/values the same
// way against either.
//
// The external backend discovers finite index universes by probing: after a
// sat answer it asserts, inside a scratch scope, that k fresh distinct
// elements cover the sort, for k = 1, 2, ... The first k that stays sat is
// the minimum universe size, and the probe scope is kept until the next state
// change so that value queries describe that minimal model. Interpolants and
// unsat cores from an external solver are never trusted as-is: cores can be
// re-checked by the caller, and interpolant sequences are validated against
// the chain conditions before being returned, so a misbehaving solver turns
// into a capability error rather than an unsound answer.

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qivc/fm/engine.hpp"
#include "qivc/fm/interp.hpp"
#include "qivc/logic/print.hpp"
#include "qivc/logic/read.hpp"
#include "qivc/smt/session.hpp"

namespace qivc::smt {

using fm::Verdict;

class Solver {
 public:
  virtual ~Solver() = default;

  virtual TermManager& tm() = 0;
  virtual std::string backend_name() const = 0;

  virtual SortId declare_index_sort(const std::string& name) = 0;
  virtual void declare_enum_sort(SortId s) = 0;
  virtual void register_const(Term c) = 0;
  virtual void register_func(uint32_t f) = 0;

  virtual void push() = 0;
  virtual void pop(size_t n = 1) = 0;
  virtual void assert_term(Term f, const std::string& name = "") = 0;
  virtual Verdict check_sat() = 0;

  // After a sat answer: size of the index universe in a minimal model, and
  // values of ground terms in that model. Index-sorted values are numbered
  // consistently within one model.
  virtual int universe_size() = 0;
  virtual std::vector<Value> get_values(const std::vector<Term>& ts) = 0;

  // After an unsat answer: names of an unsatisfiable subset of the named
  // assertions.
  virtual std::vector<std::string> unsat_core() = 0;

  virtual bool supports_interpolants() = 0;
  virtual std::vector<Term> sequence_interpolants(const std::vector<Term>& groups) = 0;
};

// ---- in-process backend ----

class BundledSolver : public Solver {
 public:
  BundledSolver() = default;
  explicit BundledSolver(TermManager& tm) : eng_(tm) {}

  fm::FmEngine& engine() { return eng_; }

  TermManager& tm() override { return eng_.tm(); }
  std::string backend_name() const override { return "bundled"; }

  SortId declare_index_sort(const std::string& name) override {
    return eng_.declare_index_sort(name);
  }
  void declare_enum_sort(SortId) override {}
  void register_const(Term c) override { eng_.register_const(c); }
  void register_func(uint32_t f) override { eng_.register_func(f); }

  void push() override { eng_.push(); }
  void pop(size_t n = 1) override { eng_.pop(n); }
  void assert_term(Term f, const std::string& name = "") override {
    eng_.assert_term(f, name);
  }
  Verdict check_sat() override { return eng_.check_sat(); }

  int universe_size() override {
    return eng_.index_sort_id() == 0 ? 0 : eng_.model().k;
  }

  std::vector<Value> get_values(const std::vector<Term>& ts) override {
    std::vector<Value> out;
    out.reserve(ts.size());
    for (Term t : ts) out.push_back(eng_.eval_in(eng_.model(), t));
    return out;
  }

  std::vector<std::string> unsat_core() override { return eng_.core_names(); }

  bool supports_interpolants() override { return true; }

  std::vector<Term> sequence_interpolants(const std::vector<Term>& groups) override {
    return fm::sequence_interpolants(eng_, groups);
  }

 private:
  fm::FmEngine eng_;
};

// ---- external backend ----

class ProcessSolver : public Solver {
 public:
  int max_probe = 32;  // universe sizes tried before giving up

  ProcessSolver(TermManager& tm, const std::string& command, int timeout_ms = 0)
      : tm_(tm), command_(command), sess_(command, timeout_ms) {
    sess_.query("(set-logic ALL)");  // advisory; some solvers reject ALL
    accepted("(set-option :produce-models true)");
    accepted("(set-option :produce-unsat-cores true)");
    itp_ok_ = accepted("(set-option :produce-interpolants true)");
  }

  SmtSession& session() { return sess_; }

  TermManager& tm() override { return tm_; }
  std::string backend_name() const override { return command_; }

  SortId declare_index_sort(const std::string& name) override {
    SortId s = tm_.index_sort(name);
    if (index_sort_ != 0 && index_sort_ != s)
      fail_capability("only one uninterpreted sort is supported");
    if (index_sort_ == 0) {
      sess_.command("(declare-sort " + name + " 0)");
      env_.sorts.emplace(name, s);
      index_sort_ = s;
    }
    return s;
  }

  void declare_enum_sort(SortId s) override {
    const SortInfo& si = tm_.sort(s);
    if (si.kind != SortKind::Enum) fail_input("not an enum sort");
    if (!env_.sorts.emplace(si.name, s).second) return;  // already declared
    std::string cs;
    for (const std::string& c : si.ctors) cs += "(" + c + ") ";
    if (!cs.empty()) cs.pop_back();
    sess_.command("(declare-datatype " + si.name + " (" + cs + "))");
    env_.add_enum(tm_, s);
  }

  void register_const(Term c) override {
    const std::string& n = tm_.name_of(c);
    if (!env_.consts.emplace(n, c).second) return;
    sess_.command("(declare-const " + n + " " + tm_.sort_name(tm_.sort_of(c)) + ")");
  }

  void register_func(uint32_t f) override {
    const FuncInfo& fi = tm_.func_info(f);
    if (!env_.funcs.emplace(fi.name, f).second) return;
    std::string args;
    for (SortId a : fi.args) args += tm_.sort_name(a) + " ";
    if (!args.empty()) args.pop_back();
    sess_.command("(declare-fun " + fi.name + " (" + args + ") " +
                  tm_.sort_name(fi.ret) + ")");
  }

  void push() override {
    unprobe();
    sess_.command("(push 1)");
  }

  void pop(size_t n = 1) override {
    unprobe();
    sess_.command("(pop " + std::to_string(n) + ")");
  }

  void assert_term(Term f, const std::string& name = "") override {
    unprobe();
    std::string t = print_term(tm_, f, PrintStyle::Smt);
    if (name.empty())
      sess_.command("(assert " + t + ")");
    else
      sess_.command("(assert (! " + t + " :named " + name + "))");
  }

  Verdict check_sat() override {
    unprobe();
    return raw_check_sat();
  }

  int universe_size() override {
    if (index_sort_ == 0) return 0;
    if (probed_) return probe_k_;
    const std::string& sn = tm_.sort(index_sort_).name;
    for (int k = 1; k <= max_probe; k++) {
      int g = gen_++;
      sess_.command("(push 1)");
      std::vector<std::string> us;
      for (int i = 0; i < k; i++) {
        us.push_back("qivc_u" + std::to_string(g) + "_" + std::to_string(i));
        sess_.command("(declare-const " + us.back() + " " + sn + ")");
      }
      std::string z = "qivc_z" + std::to_string(g);
      std::string cover = "(or";
      for (const std::string& u : us) cover += " (= " + z + " " + u + ")";
      cover += ")";
      sess_.command("(assert (forall ((" + z + " " + sn + ")) " + cover + "))");
      if (k > 1) {
        std::string d = "(assert (distinct";
        for (const std::string& u : us) d += " " + u;
        sess_.command(d + "))");
      }
      if (raw_check_sat() == Verdict::Sat) {
        // keep the probe scope so value queries see this minimal model
        probed_ = true;
        probe_k_ = k;
        elem_ids_.clear();
        std::string q = "(get-value (";
        for (const std::string& u : us) q += u + " ";
        q.pop_back();
        Sexpr r = sess_.query(q + "))");
        for (const Sexpr& pr : value_pairs(r, k)) elem_id(value_key(pr));
        if (static_cast<int>(elem_ids_.size()) != k)
          fail_solver("universe probe returned " + std::to_string(elem_ids_.size()) +
                      " distinct elements instead of " + std::to_string(k));
        return k;
      }
      sess_.command("(pop 1)");
    }
    fail_solver("no finite index universe within the probe limit");
  }

  std::vector<Value> get_values(const std::vector<Term>& ts) override {
    if (ts.empty()) return {};
    std::string q = "(get-value (";
    for (Term t : ts) q += print_term(tm_, t, PrintStyle::Smt) + " ";
    q.pop_back();
    Sexpr r = sess_.query(q + "))");
    std::vector<Value> out;
    size_t i = 0;
    for (const Sexpr& pr : value_pairs(r, ts.size()))
      out.push_back(parse_value(pr, tm_.sort_of(ts[i++])));
    return out;
  }

  std::vector<std::string> unsat_core() override {
    Sexpr r = sess_.query("(get-unsat-core)");
    if (!r.is_list()) fail_solver("unsat core reply is not a list: " + to_string(r));
    std::vector<std::string> names;
    for (const Sexpr& n : r.items) names.push_back(n.atom);
    return names;
  }

  bool supports_interpolants() override { return itp_ok_; }

  std::vector<Term> sequence_interpolants(const std::vector<Term>& groups) override {
    if (groups.size() < 2) fail_input("interpolation needs at least two groups");
    if (!itp_ok_) fail_capability("solver has no interpolant support");
    unprobe();
    int g = gen_++;
    std::vector<std::string> names;
    sess_.command("(push 1)");
    for (size_t i = 0; i < groups.size(); i++) {
      names.push_back("qivc_itp" + std::to_string(g) + "_" + std::to_string(i));
      assert_named_raw(groups[i], names.back());
    }
    if (raw_check_sat() != Verdict::Unsat) {
      sess_.command("(pop 1)");
      fail_input("interpolation chain is satisfiable");
    }
    std::string q = "(get-interpolants";
    for (const std::string& n : names) q += " " + n;
    Sexpr r = sess_.query(q + ")");
    sess_.command("(pop 1)");
    if (SmtSession::is_error(r))
      fail_capability("solver could not interpolate: " + SmtSession::error_text(r));
    if (!r.is_list() || r.size() != groups.size() - 1)
      fail_capability("interpolant reply has the wrong shape: " + to_string(r));
    std::vector<Term> itps;
    TermReader reader(tm_, env_);
    for (const Sexpr& it : r.items) {
      Term t = reader.read(it);
      if (tm_.sort_of(t) != tm_.bool_sort())
        fail_capability("interpolant is not a formula");
      itps.push_back(t);
    }
    validate_interpolants(groups, itps);
    return itps;
  }

 private:
  TermManager& tm_;
  std::string command_;
  SmtSession sess_;
  SymbolEnv env_;
  SortId index_sort_ = 0;
  bool itp_ok_ = false;
  bool probed_ = false;
  int probe_k_ = 0;
  int gen_ = 0;
  std::map<std::string, int> elem_ids_;

  bool accepted(const std::string& line) {
    Sexpr r = sess_.query(line);
    return r.is_atom && r.atom == "success";
  }

  void unprobe() {
    if (!probed_) return;
    probed_ = false;
    sess_.command("(pop 1)");
  }

  Verdict raw_check_sat() {
    Sexpr r = sess_.query("(check-sat)");
    if (r.is_atom && r.atom == "sat") return Verdict::Sat;
    if (r.is_atom && r.atom == "unsat") return Verdict::Unsat;
    if (r.is_atom && r.atom == "unknown") return Verdict::Unknown;
    fail_solver("unexpected check-sat reply: " + to_string(r));
  }

  void assert_named_raw(Term f, const std::string& name) {
    sess_.command("(assert (! " + print_term(tm_, f, PrintStyle::Smt) +
                  " :named " + name + "))");
  }

  // Splits a get-value reply into its value expressions, in query order.
  std::vector<Sexpr> value_pairs(const Sexpr& r, size_t expect) {
    if (SmtSession::is_error(r))
      fail_solver("value query failed: " + SmtSession::error_text(r));
    if (!r.is_list() || r.size() != expect)
      fail_solver("value reply has the wrong shape: " + to_string(r));
    std::vector<Sexpr> vals;
    for (const Sexpr& pr : r.items) {
      if (!pr.is_list() || pr.size() != 2)
        fail_solver("value reply entry is not a pair: " + to_string(pr));
      vals.push_back(pr[1]);
    }
    return vals;
  }

  static const Sexpr& strip_as(const Sexpr& s) {
    // (as x S) wrappers appear around datatype and universe values
    if (s.is_list() && s.size() == 3 && s[0].is_atom && s[0].atom == "as")
      return s[1];
    return s;
  }

  static std::string value_key(const Sexpr& s) { return to_string(strip_as(s)); }

  int elem_id(const std::string& key) {
    auto [it, fresh] = elem_ids_.emplace(key, static_cast<int>(elem_ids_.size()));
    (void)fresh;
    return it->second;
  }

  static mpq_class parse_num(const Sexpr& s) {
    if (s.is_atom) {
      const std::string& a = s.atom;
      size_t dot = a.find('.');
      if (dot == std::string::npos) return mpq_class(a);
      // decimal notation: shift the point away
      std::string digits = a.substr(0, dot) + a.substr(dot + 1);
      mpq_class q(digits);
      mpq_class den(1);
      for (size_t i = dot + 1; i < a.size(); i++) den *= 10;
      q /= den;
      q.canonicalize();
      return q;
    }
    if (s.size() == 2 && s[0].atom == "-") return -parse_num(s[1]);
    if (s.size() == 3 && s[0].atom == "/") return parse_num(s[1]) / parse_num(s[2]);
    fail_solver("unparseable numeric value: " + to_string(s));
  }

  Value parse_value(const Sexpr& raw, SortId sort) {
    const Sexpr& s = strip_as(raw);
    switch (tm_.sort(sort).kind) {
      case SortKind::Bool:
        if (s.is_atom && s.atom == "true") return Value::of_bool(true);
        if (s.is_atom && s.atom == "false") return Value::of_bool(false);
        fail_solver("unparseable boolean value: " + to_string(raw));
      case SortKind::Int:
      case SortKind::Real:
        return Value::of_num(parse_num(s));
      case SortKind::Enum: {
        const std::vector<std::string>& cs = tm_.sort(sort).ctors;
        for (size_t i = 0; i < cs.size(); i++)
          if (s.is_atom && s.atom == cs[i]) return Value::of_enum(static_cast<int>(i));
        fail_solver("unknown constructor value: " + to_string(raw));
      }
      case SortKind::Index:
        return Value::of_elem(elem_id(value_key(raw)));
      default:
        fail_capability("values of this sort cannot be queried directly");
    }
  }

  void validate_interpolants(const std::vector<Term>& groups,
                             const std::vector<Term>& itps) {
    size_t m = groups.size();
    std::vector<std::set<std::string>> syms(m);
    for (size_t i = 0; i < m; i++) fm::detail::symbols_of(tm_, groups[i], syms[i]);
    std::set<std::string> left;
    for (size_t i = 0; i + 1 < m; i++) {
      left.insert(syms[i].begin(), syms[i].end());
      std::set<std::string> right;
      for (size_t j = i + 1; j < m; j++) right.insert(syms[j].begin(), syms[j].end());
      std::set<std::string> is;
      fm::detail::symbols_of(tm_, itps[i], is);
      for (const std::string& s : is)
        if (!left.count(s) || !right.count(s))
          fail_capability("interpolant mentions the unshared symbol '" + s + "'");
    }
    // inductiveness of each link, checked with fresh scratch scopes
    Term prev = tm_.mk_true();
    for (size_t i = 0; i < m; i++) {
      Term want = i + 1 < m ? itps[i] : tm_.mk_false();
      sess_.command("(push 1)");
      assert_raw(prev);
      assert_raw(groups[i]);
      assert_raw(tm_.mk_not(want));
      Verdict v = raw_check_sat();
      sess_.command("(pop 1)");
      if (v != Verdict::Unsat)
        fail_capability("interpolant link " + std::to_string(i) +
                        " is not inductive");
      if (i + 1 < m) prev = itps[i];
    }
  }

  void assert_raw(Term f) {
    sess_.command("(assert " + print_term(tm_, f, PrintStyle::Smt) + ")");
  }
};

}  // namespace qivc::smt
