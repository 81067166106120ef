#pragma once

// Concrete evaluation of ground formulas over explicit states. Index-sorted
// constants evaluate to universe element ids; arrays are finite tables over
// those ids. Quantifiers range over the state's universe. Used for lemma
// filtering and trace reporting; the test suite keeps its own independent
// evaluator for oracle checks.

#include <gmpxx.h>

#include <map>
#include <string>
#include <utility>

#include "qivc/logic/term.hpp"
#include "qivc/util/error.hpp"

namespace qivc {

struct Value {
  enum class Kind { Bool, Num, Enum, Elem };
  Kind kind = Kind::Bool;
  bool b = false;
  mpq_class q = 0;
  int e = 0;

  static Value of_bool(bool v) { return {Kind::Bool, v, 0, 0}; }
  static Value of_num(mpq_class v) { return {Kind::Num, false, std::move(v), 0}; }
  static Value of_enum(int pos) { return {Kind::Enum, false, 0, pos}; }
  static Value of_elem(int id) { return {Kind::Elem, false, 0, id}; }

  bool operator==(const Value& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
      case Kind::Bool: return b == o.b;
      case Kind::Num: return q == o.q;
      default: return e == o.e;
    }
  }
  bool operator!=(const Value& o) const { return !(*this == o); }
  bool operator<(const Value& o) const {
    if (kind != o.kind) return kind < o.kind;
    switch (kind) {
      case Kind::Bool: return b < o.b;
      case Kind::Num: return q < o.q;
      default: return e < o.e;
    }
  }
};

// One concrete state of a ground instance: scalar variables (including the
// frozen index constants) and array contents over a universe of `universe`
// elements.
struct GroundState {
  int universe = 0;
  std::map<std::string, Value> scalars;
  std::map<std::pair<std::string, int>, Value> arrays;

  bool operator==(const GroundState& o) const {
    return universe == o.universe && scalars == o.scalars && arrays == o.arrays;
  }
  bool operator<(const GroundState& o) const {
    if (universe != o.universe) return universe < o.universe;
    if (scalars != o.scalars) return scalars < o.scalars;
    return arrays < o.arrays;
  }
};

class Evaluator {
 public:
  Evaluator(const TermManager& tm, const GroundState& cur, const GroundState* next = nullptr)
      : tm_(tm), cur_(cur), next_(next) {}

  bool eval_bool(Term t) {
    Value v = eval(t);
    if (v.kind != Value::Kind::Bool) fail_internal("expected a Bool value");
    return v.b;
  }

  Value eval(Term t) {
    switch (tm_.op(t)) {
      case Op::True: return Value::of_bool(true);
      case Op::False: return Value::of_bool(false);
      case Op::IntLit: return Value::of_num(mpq_class(static_cast<long>(tm_.payload(t))));
      case Op::EnumLit: return Value::of_enum(static_cast<int>(tm_.payload(t)));
      case Op::Var: {
        auto it = bindings_.find(t);
        if (it == bindings_.end())
          fail_internal("unbound variable '" + tm_.name_of(t) + "' in evaluation");
        return it->second;
      }
      case Op::Const: return scalar(cur_, tm_.name_of(t));
      case Op::Next: return scalar(need_next(), tm_.name_of(tm_.child(t, 0)));
      case Op::Select: {
        Term arr = tm_.child(t, 0);
        Value idx = eval(tm_.child(t, 1));
        if (idx.kind != Value::Kind::Elem) fail_internal("array index is not an element");
        if (tm_.op(arr) == Op::Const) return array(cur_, tm_.name_of(arr), idx.e);
        if (tm_.op(arr) == Op::Next)
          return array(need_next(), tm_.name_of(tm_.child(arr, 0)), idx.e);
        fail_internal("select on a non-variable array");
      }
      case Op::Eq: return Value::of_bool(eval(tm_.child(t, 0)) == eval(tm_.child(t, 1)));
      case Op::Le: return Value::of_bool(num(tm_.child(t, 0)) <= num(tm_.child(t, 1)));
      case Op::Lt: return Value::of_bool(num(tm_.child(t, 0)) < num(tm_.child(t, 1)));
      case Op::Add: {
        mpq_class s = 0;
        for (size_t i = 0; i < tm_.arity(t); i++) s += num(tm_.child(t, i));
        return Value::of_num(s);
      }
      case Op::Mul:
        return Value::of_num(mpq_class(static_cast<long>(tm_.payload(tm_.child(t, 0)))) *
                             num(tm_.child(t, 1)));
      case Op::Not: return Value::of_bool(!eval_bool(tm_.child(t, 0)));
      case Op::And: {
        for (size_t i = 0; i < tm_.arity(t); i++)
          if (!eval_bool(tm_.child(t, i))) return Value::of_bool(false);
        return Value::of_bool(true);
      }
      case Op::Or: {
        for (size_t i = 0; i < tm_.arity(t); i++)
          if (eval_bool(tm_.child(t, i))) return Value::of_bool(true);
        return Value::of_bool(false);
      }
      case Op::Implies:
        return Value::of_bool(!eval_bool(tm_.child(t, 0)) || eval_bool(tm_.child(t, 1)));
      case Op::Iff:
        return Value::of_bool(eval_bool(tm_.child(t, 0)) == eval_bool(tm_.child(t, 1)));
      case Op::Forall:
      case Op::Exists:
        return Value::of_bool(quant(t, 0, tm_.op(t) == Op::Forall));
      default: fail_internal("unevaluable term");
    }
  }

 private:
  const TermManager& tm_;
  const GroundState& cur_;
  const GroundState* next_;
  std::map<Term, Value> bindings_;

  const GroundState& need_next() {
    if (!next_) fail_internal("primed variable outside a transition evaluation");
    return *next_;
  }

  mpq_class num(Term t) {
    Value v = eval(t);
    if (v.kind != Value::Kind::Num) fail_internal("expected a numeric value");
    return v.q;
  }

  Value scalar(const GroundState& s, const std::string& name) {
    auto it = s.scalars.find(name);
    if (it != s.scalars.end()) return it->second;
    fail_internal("state has no value for '" + name + "'");
  }

  Value array(const GroundState& s, const std::string& name, int elem) {
    auto it = s.arrays.find({name, elem});
    if (it != s.arrays.end()) return it->second;
    fail_internal("state has no value for '" + name + "[" + std::to_string(elem) + "]'");
  }

  bool quant(Term t, size_t vi, bool is_forall) {
    if (vi == tm_.binder_arity(t)) return eval_bool(tm_.binder_body(t));
    Term v = tm_.binder_var(t, vi);
    for (int e = 0; e < cur_.universe; e++) {
      bindings_[v] = Value::of_elem(e);
      bool r = quant(t, vi + 1, is_forall);
      if (r != is_forall) {
        bindings_.erase(v);
        return r;
      }
    }
    bindings_.erase(v);
    return is_forall;
  }
};

}  // namespace qivc
