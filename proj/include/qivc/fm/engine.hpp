#pragma once

// Decision engine for formulas over one uninterpreted index sort with
// Int/Real/Bool/enum element values: scans universe sizes k = 1, 2, ...,
// expanding quantifiers over k fresh elements and deciding each expansion
// with the SAT+arithmetic core. A size bound makes the scan complete when the
// formula set has no existential under a universal and no function into the
// index sort: a model can then be restricted to the elements named by index
// constants and existential witnesses, so checking up to that many suffices.
// Sets without such a bound are scanned up to a configurable cap and report
// unknown beyond it. Scanning upward also makes any model found minimal in
// the universe size.
//
// Unsat answers collect an unsatisfiable core as the union of the per-size
// assumption cores: each per-size core is unsatisfiable at its size, the
// union subsumes each of them, and the size bound argument applies to the
// union as well (its constants and witnesses are a subset), so the union is
// unsatisfiable at every size.

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qivc/fm/encode.hpp"
#include "qivc/logic/ops.hpp"
#include "qivc/logic/print.hpp"

namespace qivc::fm {

enum class Verdict { Sat, Unsat, Unknown };

struct EngineOutcome {
  Verdict verdict = Verdict::Unknown;
  FmModel model;           // when Sat
  std::set<size_t> core;   // indices into the formula list, when Unsat
};

class FmEngine {
 public:
  int max_universe = 8;  // scan cap for formula sets without a size bound

  FmEngine() : owned_(std::make_unique<TermManager>()), tm_(*owned_) {}
  explicit FmEngine(TermManager& tm) : tm_(tm) {}

  TermManager& tm() { return tm_; }

  SortId declare_index_sort(const std::string& name) {
    SortId s = tm_.index_sort(name);
    if (index_sort_ != 0 && index_sort_ != s)
      fail_capability("only one uninterpreted sort is supported");
    index_sort_ = s;
    return s;
  }
  SortId index_sort_id() const { return index_sort_; }

  void register_const(Term c) {
    if (std::find(consts_.begin(), consts_.end(), c) == consts_.end())
      consts_.push_back(c);
  }
  void register_func(uint32_t f) {
    if (std::find(funcs_.begin(), funcs_.end(), f) == funcs_.end())
      funcs_.push_back(f);
  }

  void push() { scopes_.emplace_back(); }

  void pop(size_t n) {
    if (n >= scopes_.size()) fail_input("pop exceeds the assertion stack");
    for (size_t i = 0; i < n; i++) scopes_.pop_back();
    invalidate();
  }

  void assert_term(Term f, const std::string& name) {
    scopes_.back().push_back(Assertion{f, name});
    invalidate();
  }

  Term named_formula(const std::string& name) const {
    for (const auto& scope : scopes_)
      for (const auto& a : scope)
        if (a.name == name) return a.f;
    fail_input("no assertion named '" + name + "'");
  }

  Verdict check_sat() {
    std::vector<Assertion> all = flatten();
    std::vector<Term> fs;
    for (const auto& a : all) fs.push_back(a.f);
    last_ = solve_formulas(fs);
    have_result_ = true;
    core_names_.clear();
    if (last_.verdict == Verdict::Unsat)
      for (size_t i : last_.core)
        if (!all[i].name.empty()) core_names_.push_back(all[i].name);
    return last_.verdict;
  }

  // Decides a conjunction independent of the assertion stack. Interpolation
  // reuses this for its side queries.
  EngineOutcome solve_formulas(const std::vector<Term>& fs) {
    bool bounded = true;
    size_t ex_width = 0;
    std::set<Term> idx_consts;
    for (Term f : fs) {
      for (Term c : index_constants_in(tm_, f))
        if (!universe_elem_.count(c)) idx_consts.insert(c);
      Term nnf = to_nnf(tm_, f);
      if (!no_exists_under_forall(nnf, false)) bounded = false;
      if (has_index_codomain(f)) bounded = false;
      ex_width += exists_width(nnf);
    }
    int k0 = static_cast<int>(std::max<size_t>(1, idx_consts.size() + ex_width));
    int limit = bounded ? k0 : max_universe;
    if (index_sort_ == 0) limit = 1;  // no index sort: one ground solve

    EngineOutcome out;
    for (int k = 1; k <= limit; k++) {
      std::vector<Term> elems;
      std::map<Term, int> ids;
      if (index_sort_ != 0) {
        for (int j = 0; j < k; j++) {
          Term e = universe_const(j);
          elems.push_back(e);
          ids.emplace(e, j);
        }
      }
      GroundEncoder enc(tm_, k, ids);
      std::vector<Lit> guards;
      for (Term f : fs) {
        Term g = index_sort_ ? ground_quantifiers(tm_, f, elems) : f;
        guards.push_back(enc.guard_formula(g));
      }
      if (enc.solve(guards) == GroundEncoder::Out::Sat) {
        out.verdict = Verdict::Sat;
        out.model = enc.extract_model();
        return out;
      }
      for (Lit l : enc.conflict()) {
        auto it = std::find(guards.begin(), guards.end(), l);
        if (it != guards.end()) out.core.insert(it - guards.begin());
      }
    }
    out.verdict = bounded ? Verdict::Unsat : Verdict::Unknown;
    return out;
  }

  // ---- results ----

  const FmModel& model() const {
    if (!have_result_ || last_.verdict != Verdict::Sat)
      fail_input("no model is available");
    return last_.model;
  }

  const std::vector<std::string>& core_names() const {
    if (!have_result_ || last_.verdict != Verdict::Unsat)
      fail_input("no unsatisfiable core is available");
    return core_names_;
  }

  Value eval_in(const FmModel& m, Term t) const {
    std::map<Term, Value> env;
    return eval_rec(m, t, env);
  }

  std::string model_text() const {
    const FmModel& m = model();
    std::ostringstream os;
    os << "(\n";
    if (index_sort_ != 0) {
      const std::string& sn = tm_.sort(index_sort_).name;
      for (int j = 0; j < m.k; j++)
        os << "  (declare-fun " << sn << "!val!" << j << " () " << sn << ")\n";
    }
    for (Term c : consts_) {
      SortId s = tm_.sort_of(c);
      if (tm_.sort(s).kind == SortKind::Array) continue;  // use get-value
      os << "  (define-fun " << tm_.name_of(c) << " () " << tm_.sort_name(s)
         << " " << value_text(eval_in(m, c), s) << ")\n";
    }
    for (uint32_t f : funcs_) {
      const FuncInfo& fi = tm_.func_info(f);
      bool index_args = true;
      for (SortId a : fi.args) index_args &= tm_.sort(a).kind == SortKind::Index;
      if (!index_args || fi.ret != tm_.bool_sort()) continue;
      os << "  (define-fun " << fi.name << " (";
      for (size_t i = 0; i < fi.args.size(); i++) {
        if (i) os << " ";
        os << "(x!" << i << " " << tm_.sort_name(fi.args[i]) << ")";
      }
      os << ") Bool " << predicate_body(m, f, fi) << ")\n";
    }
    os << ")";
    return os.str();
  }

  std::string values_text(const std::vector<Term>& ts) const {
    const FmModel& m = model();
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < ts.size(); i++) {
      if (i) os << "\n ";
      os << "(" << print_term(tm_, ts[i], PrintStyle::Smt) << " "
         << value_text(eval_in(m, ts[i]), tm_.sort_of(ts[i])) << ")";
    }
    os << ")";
    return os.str();
  }

  std::string core_text() const {
    std::ostringstream os;
    os << "(";
    const auto& names = core_names();
    for (size_t i = 0; i < names.size(); i++) {
      if (i) os << " ";
      os << names[i];
    }
    os << ")";
    return os.str();
  }

  std::string value_text(const Value& v, SortId s) const {
    switch (v.kind) {
      case Value::Kind::Bool:
        return v.b ? "true" : "false";
      case Value::Kind::Num: {
        mpq_class q = v.q;
        bool neg = q < 0;
        if (neg) q = -q;
        std::string body = q.get_den() == 1
                               ? q.get_num().get_str()
                               : "(/ " + q.get_num().get_str() + " " +
                                     q.get_den().get_str() + ")";
        return neg ? "(- " + body + ")" : body;
      }
      case Value::Kind::Enum:
        return tm_.sort(s).ctors[v.e];
      case Value::Kind::Elem:
        return tm_.sort(index_sort_).name + "!val!" + std::to_string(v.e);
    }
    fail_internal("unprintable value");
  }

 private:
  struct Assertion {
    Term f;
    std::string name;
  };

  std::unique_ptr<TermManager> owned_;  // present when not borrowing
  TermManager& tm_;
  SortId index_sort_ = 0;
  std::vector<Term> consts_;
  std::vector<uint32_t> funcs_;
  std::vector<std::vector<Assertion>> scopes_{1};
  std::map<Term, int> universe_elem_;

  bool have_result_ = false;
  EngineOutcome last_;
  std::vector<std::string> core_names_;

  void invalidate() { have_result_ = false; }

  std::vector<Assertion> flatten() const {
    std::vector<Assertion> all;
    for (const auto& scope : scopes_)
      for (const auto& a : scope) all.push_back(a);
    return all;
  }

  Term universe_const(int j) {
    if (index_sort_ == 0) fail_internal("universe element without an index sort");
    Term c = tm_.mk_const(tm_.sort(index_sort_).name + "!val!" + std::to_string(j),
                          index_sort_);
    universe_elem_.emplace(c, j);
    return c;
  }

  // ---- size-bound analysis ----

  bool no_exists_under_forall(Term t, bool in_forall) const {
    switch (tm_.op(t)) {
      case Op::Exists:
        return !in_forall && no_exists_under_forall(tm_.binder_body(t), false);
      case Op::Forall:
        return no_exists_under_forall(tm_.binder_body(t), true);
      default:
        for (size_t i = 0; i < tm_.arity(t); i++)
          if (!no_exists_under_forall(tm_.child(t, i), in_forall)) return false;
        return true;
    }
  }

  size_t exists_width(Term t) const {
    size_t n = 0;
    switch (tm_.op(t)) {
      case Op::Exists:
        n = tm_.binder_arity(t) + exists_width(tm_.binder_body(t));
        break;
      case Op::Forall:
        n = exists_width(tm_.binder_body(t));
        break;
      default:
        for (size_t i = 0; i < tm_.arity(t); i++) n += exists_width(tm_.child(t, i));
    }
    return n;
  }

  bool has_index_codomain(Term t) const {
    bool found = false;
    for_each_subterm(tm_, t, [&](Term s) {
      if (tm_.op(s) == Op::Apply || tm_.op(s) == Op::Select)
        found |= tm_.sort(tm_.sort_of(s)).kind == SortKind::Index;
    });
    return found;
  }

  // ---- model evaluation ----

  static Value default_value(SortKind kind) {
    switch (kind) {
      case SortKind::Bool:
        return Value::of_bool(false);
      case SortKind::Int:
      case SortKind::Real:
        return Value::of_num(0);
      case SortKind::Enum:
        return Value::of_enum(0);
      case SortKind::Index:
        return Value::of_elem(0);
      default:
        fail_internal("no default value for this sort");
    }
  }

  Value eval_rec(const FmModel& m, Term t, std::map<Term, Value>& env) const {
    switch (tm_.op(t)) {
      case Op::True:
        return Value::of_bool(true);
      case Op::False:
        return Value::of_bool(false);
      case Op::IntLit:
        return Value::of_num(mpq_class(static_cast<long>(tm_.payload(t))));
      case Op::EnumLit:
        return Value::of_enum(static_cast<int>(tm_.payload(t)));
      case Op::Var: {
        auto it = env.find(t);
        if (it == env.end()) fail_internal("unbound variable under evaluation");
        return it->second;
      }
      case Op::Const: {
        if (auto it = universe_elem_.find(t); it != universe_elem_.end())
          return Value::of_elem(it->second);
        SortKind kind = tm_.sort(tm_.sort_of(t)).kind;
        if (kind == SortKind::Index) {
          auto it = m.const_elem.find(t);
          return it == m.const_elem.end() ? Value::of_elem(0)
                                          : Value::of_elem(it->second);
        }
        auto it = m.scalars.find(t);
        return it == m.scalars.end() ? default_value(kind) : it->second;
      }
      case Op::Select: {
        Term arr = tm_.child(t, 0);
        Value idx = eval_rec(m, tm_.child(t, 1), env);
        auto it = m.array_cells.find({arr, idx.e});
        if (it != m.array_cells.end()) return it->second;
        return default_value(tm_.sort(tm_.sort_of(t)).kind);
      }
      case Op::Apply: {
        std::vector<int> tup;
        for (Term a : tm_.children(t)) tup.push_back(eval_rec(m, a, env).e);
        auto it = m.func_cells.find({static_cast<uint32_t>(tm_.payload(t)), tup});
        if (it != m.func_cells.end()) return it->second;
        return default_value(tm_.sort(tm_.sort_of(t)).kind);
      }
      case Op::Eq:
        return Value::of_bool(eval_rec(m, tm_.child(t, 0), env) ==
                              eval_rec(m, tm_.child(t, 1), env));
      case Op::Le:
      case Op::Lt: {
        mpq_class a = eval_rec(m, tm_.child(t, 0), env).q;
        mpq_class b = eval_rec(m, tm_.child(t, 1), env).q;
        return Value::of_bool(tm_.op(t) == Op::Le ? a <= b : a < b);
      }
      case Op::Add: {
        mpq_class s = 0;
        for (Term c : tm_.children(t)) s += eval_rec(m, c, env).q;
        return Value::of_num(s);
      }
      case Op::Mul:
        return Value::of_num(
            mpq_class(static_cast<long>(tm_.payload(tm_.child(t, 0)))) *
            eval_rec(m, tm_.child(t, 1), env).q);
      case Op::Not:
        return Value::of_bool(!eval_rec(m, tm_.child(t, 0), env).b);
      case Op::And: {
        for (Term c : tm_.children(t))
          if (!eval_rec(m, c, env).b) return Value::of_bool(false);
        return Value::of_bool(true);
      }
      case Op::Or: {
        for (Term c : tm_.children(t))
          if (eval_rec(m, c, env).b) return Value::of_bool(true);
        return Value::of_bool(false);
      }
      case Op::Implies:
        return Value::of_bool(!eval_rec(m, tm_.child(t, 0), env).b ||
                              eval_rec(m, tm_.child(t, 1), env).b);
      case Op::Iff:
        return Value::of_bool(eval_rec(m, tm_.child(t, 0), env).b ==
                              eval_rec(m, tm_.child(t, 1), env).b);
      case Op::Forall:
      case Op::Exists: {
        bool is_forall = tm_.op(t) == Op::Forall;
        return Value::of_bool(eval_quant(m, t, 0, is_forall, env));
      }
      default:
        fail_internal("unevaluable operator in the model evaluator");
    }
  }

  bool eval_quant(const FmModel& m, Term t, size_t vi, bool is_forall,
                  std::map<Term, Value>& env) const {
    if (vi == tm_.binder_arity(t)) return eval_rec(m, tm_.binder_body(t), env).b;
    Term v = tm_.binder_var(t, vi);
    for (int e = 0; e < m.k; e++) {
      env[v] = Value::of_elem(e);
      bool r = eval_quant(m, t, vi + 1, is_forall, env);
      if (r != is_forall) {
        env.erase(v);
        return r;
      }
    }
    env.erase(v);
    return is_forall;
  }

  std::string predicate_body(const FmModel& m, uint32_t f, const FuncInfo& fi) const {
    std::vector<std::string> rows;
    std::vector<int> tup(fi.args.size(), 0);
    for (;;) {
      auto it = m.func_cells.find({f, tup});
      if (it != m.func_cells.end() && it->second.b) {
        std::string row;
        for (size_t i = 0; i < tup.size(); i++) {
          std::string eq = "(= x!" + std::to_string(i) + " " +
                           value_text(Value::of_elem(tup[i]), fi.args[i]) + ")";
          row = row.empty() ? eq : row + " " + eq;
        }
        rows.push_back(tup.size() == 1 ? row : "(and " + row + ")");
      }
      size_t d = 0;
      for (; d < tup.size(); d++) {
        if (++tup[d] < m.k) break;
        tup[d] = 0;
      }
      if (d == tup.size() || tup.empty()) break;
    }
    if (rows.empty()) return "false";
    if (rows.size() == 1) return rows[0];
    std::string body = "(or";
    for (const std::string& r : rows) body += " " + r;
    return body + ")";
  }
};

}  // namespace qivc::fm
