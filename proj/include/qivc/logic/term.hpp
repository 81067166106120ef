#pragma once

// Hash-consed term DAG shared by every component. Formulas are terms of Bool
// sort. Nodes are immutable after interning; structural equality is pointer
// (id) equality. Binders carry their variables inline and get canonical
// de-Bruijn-style names at construction, so alpha-equivalent inputs intern to
// the identical node and serialization is deterministic.

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "qivc/util/error.hpp"

namespace qivc {

using SortId = uint32_t;

enum class SortKind : uint8_t { Bool, Int, Real, Index, Enum, Array };

struct SortInfo {
  SortKind kind;
  std::string name;                 // Index and Enum sorts
  std::vector<std::string> ctors;   // Enum sorts
  SortId index = 0;                 // Array sorts
  SortId elem = 0;                  // Array sorts
};

enum class Op : uint8_t {
  True,
  False,
  Var,      // named variable; payload = name id
  Const,    // uninterpreted constant; payload = name id
  Apply,    // uninterpreted function application; payload = function id
  Select,   // array read; children = {array, index}
  Next,     // primed occurrence of a state constant; child = Const
  IntLit,   // payload = value
  EnumLit,  // payload = constructor position within the enum sort
  Eq,
  Le,
  Lt,
  Add,      // n-ary
  Mul,      // children = {IntLit coefficient, term}; linear arithmetic only
  Not,
  And,      // n-ary
  Or,       // n-ary
  Implies,
  Iff,
  Forall,   // payload = #vars k; children = {v_1..v_k, body}
  Exists,
};

struct Term {
  uint32_t id = 0;
  bool valid() const { return id != 0; }
  bool operator==(const Term& o) const { return id == o.id; }
  bool operator!=(const Term& o) const { return id != o.id; }
  bool operator<(const Term& o) const { return id < o.id; }
};

struct TermHash {
  size_t operator()(const Term& t) const { return t.id * 2654435761u; }
};

struct FuncInfo {
  std::string name;
  std::vector<SortId> args;
  SortId ret;
};

class TermManager {
 public:
  TermManager() {
    // slot 0 is the invalid term/sort
    nodes_.push_back({});
    sorts_.push_back({});
    bool_ = intern_sort({SortKind::Bool, "Bool", {}, 0, 0});
    int_ = intern_sort({SortKind::Int, "Int", {}, 0, 0});
    real_ = intern_sort({SortKind::Real, "Real", {}, 0, 0});
    true_ = intern(Op::True, bool_, 0, {});
    false_ = intern(Op::False, bool_, 0, {});
  }

  TermManager(const TermManager&) = delete;
  TermManager& operator=(const TermManager&) = delete;

  // ---- sorts ----

  SortId bool_sort() const { return bool_; }
  SortId int_sort() const { return int_; }
  SortId real_sort() const { return real_; }

  SortId index_sort(const std::string& name) {
    return intern_sort({SortKind::Index, name, {}, 0, 0});
  }

  SortId enum_sort(const std::string& name, const std::vector<std::string>& ctors) {
    if (ctors.empty()) fail_sort("enum sort '" + name + "' needs at least one constructor");
    return intern_sort({SortKind::Enum, name, ctors, 0, 0});
  }

  SortId array_sort(SortId index, SortId elem) {
    if (sort(index).kind != SortKind::Index)
      fail_sort("array index sort must be an index sort");
    if (sort(elem).kind == SortKind::Array) fail_sort("arrays of arrays are not supported");
    return intern_sort({SortKind::Array, "", {}, index, elem});
  }

  const SortInfo& sort(SortId s) const { return sorts_[s]; }

  std::string sort_name(SortId s) const {
    const SortInfo& si = sorts_[s];
    switch (si.kind) {
      case SortKind::Bool: return "Bool";
      case SortKind::Int: return "Int";
      case SortKind::Real: return "Real";
      case SortKind::Index:
      case SortKind::Enum: return si.name;
      case SortKind::Array:
        return "(Array " + sort_name(si.index) + " " + sort_name(si.elem) + ")";
    }
    return "?";
  }

  // ---- node access ----

  Op op(Term t) const { return nodes_[t.id].op; }
  SortId sort_of(Term t) const { return nodes_[t.id].sort; }
  int64_t payload(Term t) const { return nodes_[t.id].payload; }

  size_t arity(Term t) const { return nodes_[t.id].child_count; }
  Term child(Term t, size_t i) const {
    return Term{children_[nodes_[t.id].child_begin + i]};
  }
  std::vector<Term> children(Term t) const {
    const Node& n = nodes_[t.id];
    std::vector<Term> cs(n.child_count);
    for (uint32_t i = 0; i < n.child_count; i++) cs[i] = Term{children_[n.child_begin + i]};
    return cs;
  }

  const std::string& name_of(Term t) const {
    Op o = op(t);
    if (o == Op::Var || o == Op::Const) return names_[nodes_[t.id].payload];
    if (o == Op::Apply) return funcs_[nodes_[t.id].payload].name;
    fail_internal("name_of on unnamed term");
  }

  const FuncInfo& func(Term t) const { return funcs_[nodes_[t.id].payload]; }
  const FuncInfo& func_info(uint32_t id) const { return funcs_[id]; }

  size_t binder_arity(Term t) const { return static_cast<size_t>(nodes_[t.id].payload); }
  Term binder_var(Term t, size_t i) const { return child(t, i); }
  Term binder_body(Term t) const { return child(t, binder_arity(t)); }

  bool is_binder(Term t) const {
    Op o = op(t);
    return o == Op::Forall || o == Op::Exists;
  }

  // ---- builders ----

  Term mk_true() const { return true_; }
  Term mk_false() const { return false_; }
  Term mk_bool(bool b) const { return b ? true_ : false_; }

  Term mk_var(const std::string& name, SortId s) {
    return intern(Op::Var, s, name_id(name), {});
  }

  Term mk_const(const std::string& name, SortId s) {
    return intern(Op::Const, s, name_id(name), {});
  }

  uint32_t mk_func(const std::string& name, std::vector<SortId> args, SortId ret) {
    auto it = func_ids_.find(name);
    if (it != func_ids_.end()) {
      const FuncInfo& f = funcs_[it->second];
      if (f.args != args || f.ret != ret)
        fail_sort("function '" + name + "' redeclared with a different signature");
      return it->second;
    }
    funcs_.push_back({name, std::move(args), ret});
    uint32_t id = static_cast<uint32_t>(funcs_.size() - 1);
    func_ids_.emplace(name, id);
    return id;
  }

  std::optional<uint32_t> find_func(const std::string& name) const {
    auto it = func_ids_.find(name);
    if (it == func_ids_.end()) return std::nullopt;
    return it->second;
  }

  Term mk_apply(uint32_t func_id, const std::vector<Term>& args) {
    const FuncInfo& f = funcs_[func_id];
    if (args.size() != f.args.size())
      fail_sort("function '" + f.name + "' applied to " + std::to_string(args.size()) +
                " arguments, expected " + std::to_string(f.args.size()));
    for (size_t i = 0; i < args.size(); i++)
      if (sort_of(args[i]) != f.args[i])
        fail_sort("argument " + std::to_string(i + 1) + " of '" + f.name +
                  "' has sort " + sort_name(sort_of(args[i])));
    return intern(Op::Apply, f.ret, func_id, ids(args));
  }

  Term mk_select(Term array, Term index) {
    const SortInfo& as = sort(sort_of(array));
    if (as.kind != SortKind::Array) fail_sort("select on a non-array term");
    if (sort_of(index) != as.index) fail_sort("select index has the wrong sort");
    return intern(Op::Select, as.elem, 0, {array.id, index.id});
  }

  Term mk_next(Term state_const) {
    if (op(state_const) != Op::Const) fail_sort("next applies to a declared state variable");
    return intern(Op::Next, sort_of(state_const), 0, {state_const.id});
  }

  Term mk_int(int64_t v) { return intern(Op::IntLit, int_, v, {}); }

  // Integer-valued numeral of Int or Real sort. Real constants are restricted
  // to integer values; the linear-arithmetic fragment never needs more.
  Term mk_num(int64_t v, SortId s) {
    if (sort(s).kind != SortKind::Int && sort(s).kind != SortKind::Real)
      fail_sort("numeral of a non-numeric sort");
    return intern(Op::IntLit, s, v, {});
  }

  Term mk_enum(SortId enum_s, const std::string& ctor) {
    const SortInfo& si = sort(enum_s);
    if (si.kind != SortKind::Enum) fail_sort("enum literal of a non-enum sort");
    for (size_t i = 0; i < si.ctors.size(); i++)
      if (si.ctors[i] == ctor) return intern(Op::EnumLit, enum_s, static_cast<int64_t>(i), {});
    fail_sort("'" + ctor + "' is not a constructor of " + si.name);
  }

  Term mk_enum_at(SortId enum_s, size_t pos) {
    return intern(Op::EnumLit, enum_s, static_cast<int64_t>(pos), {});
  }

  Term mk_eq(Term a, Term b) {
    if (sort_of(a) != sort_of(b))
      fail_sort("equality between " + sort_name(sort_of(a)) + " and " +
                sort_name(sort_of(b)));
    if (sort_of(a) == bool_) return mk_iff(a, b);
    if (a == b) return true_;
    if (op(a) == Op::EnumLit && op(b) == Op::EnumLit) return mk_bool(payload(a) == payload(b));
    if (op(a) == Op::IntLit && op(b) == Op::IntLit) return mk_bool(payload(a) == payload(b));
    if (b < a) std::swap(a, b);
    return intern(Op::Eq, bool_, 0, {a.id, b.id});
  }

  Term mk_le(Term a, Term b) {
    check_numeric(a, b, "<=");
    if (op(a) == Op::IntLit && op(b) == Op::IntLit) return mk_bool(payload(a) <= payload(b));
    return intern(Op::Le, bool_, 0, {a.id, b.id});
  }

  Term mk_lt(Term a, Term b) {
    check_numeric(a, b, "<");
    if (op(a) == Op::IntLit && op(b) == Op::IntLit) return mk_bool(payload(a) < payload(b));
    return intern(Op::Lt, bool_, 0, {a.id, b.id});
  }

  Term mk_ge(Term a, Term b) { return mk_le(b, a); }
  Term mk_gt(Term a, Term b) { return mk_lt(b, a); }

  Term mk_add(std::vector<Term> ts) {
    if (ts.empty()) return mk_int(0);
    SortId s = sort_of(ts[0]);
    std::vector<uint32_t> flat;
    for (Term t : ts) {
      check_numeric_one(t, "+");
      if (sort_of(t) != s) fail_sort("mixed-sort addition");
      if (op(t) == Op::Add)
        for (Term c : children(t)) flat.push_back(c.id);
      else
        flat.push_back(t.id);
    }
    if (flat.size() == 1) return Term{flat[0]};
    return intern(Op::Add, s, 0, flat);
  }

  Term mk_add(Term a, Term b) { return mk_add(std::vector<Term>{a, b}); }

  Term mk_mul(int64_t coeff, Term t) {
    check_numeric_one(t, "*");
    if (coeff == 0) return mk_num(0, sort_of(t));
    if (coeff == 1) return t;
    if (op(t) == Op::IntLit) return mk_num(coeff * payload(t), sort_of(t));
    if (op(t) == Op::Mul) {
      int64_t inner = payload(child(t, 0));
      return mk_mul(coeff * inner, child(t, 1));
    }
    return intern(Op::Mul, sort_of(t), 0, {mk_int(coeff).id, t.id});
  }

  Term mk_neg(Term t) { return mk_mul(-1, t); }
  Term mk_sub(Term a, Term b) { return mk_add(a, mk_neg(b)); }

  Term mk_not(Term t) {
    check_bool(t, "not");
    if (t == true_) return false_;
    if (t == false_) return true_;
    if (op(t) == Op::Not) return child(t, 0);
    return intern(Op::Not, bool_, 0, {t.id});
  }

  Term mk_and(const std::vector<Term>& ts) { return mk_nary(Op::And, ts); }
  Term mk_and(Term a, Term b) { return mk_nary(Op::And, {a, b}); }
  Term mk_or(const std::vector<Term>& ts) { return mk_nary(Op::Or, ts); }
  Term mk_or(Term a, Term b) { return mk_nary(Op::Or, {a, b}); }

  Term mk_implies(Term a, Term b) {
    check_bool(a, "=>");
    check_bool(b, "=>");
    if (a == true_) return b;
    if (a == false_) return true_;
    if (b == true_) return true_;
    if (b == false_) return mk_not(a);
    return intern(Op::Implies, bool_, 0, {a.id, b.id});
  }

  Term mk_iff(Term a, Term b) {
    check_bool(a, "iff");
    check_bool(b, "iff");
    if (a == b) return true_;
    if (a == true_) return b;
    if (b == true_) return a;
    if (a == false_) return mk_not(b);
    if (b == false_) return mk_not(a);
    if (b < a) std::swap(a, b);
    return intern(Op::Iff, bool_, 0, {a.id, b.id});
  }

  Term mk_forall(const std::vector<Term>& vars, Term body) {
    return mk_binder(Op::Forall, vars, body);
  }
  Term mk_exists(const std::vector<Term>& vars, Term body) {
    return mk_binder(Op::Exists, vars, body);
  }

  // Substitution with shadow awareness and capture avoidance. Keys must be
  // Var or Const terms.
  Term substitute(Term t, const std::unordered_map<Term, Term, TermHash>& map) {
    std::unordered_map<Term, Term, TermHash> cache;
    return subst_rec(t, map, cache);
  }

  // ---- canonical bound-variable names ----

  static bool is_canonical_name(const std::string& n) {
    if (n.size() < 3 || n[0] != 'i' || n[1] != '!') return false;
    for (size_t i = 2; i < n.size(); i++)
      if (!std::isdigit(static_cast<unsigned char>(n[i]))) return false;
    return true;
  }

  static std::string canonical_name(size_t k) { return "i!" + std::to_string(k); }

 private:
  struct Node {
    Op op = Op::True;
    SortId sort = 0;
    int64_t payload = 0;
    uint32_t child_begin = 0;
    uint32_t child_count = 0;
  };

  struct NodeKey {
    Op op;
    SortId sort;
    int64_t payload;
    std::vector<uint32_t> children;
    bool operator==(const NodeKey& o) const {
      return op == o.op && sort == o.sort && payload == o.payload && children == o.children;
    }
  };
  struct NodeKeyHash {
    size_t operator()(const NodeKey& k) const {
      size_t h = static_cast<size_t>(k.op) * 31 + k.sort;
      h = h * 1000003 + static_cast<size_t>(k.payload);
      for (uint32_t c : k.children) h = h * 1000003 + c;
      return h;
    }
  };

  std::vector<Node> nodes_;
  std::vector<uint32_t> children_;
  std::unordered_map<NodeKey, uint32_t, NodeKeyHash> intern_map_;

  std::vector<SortInfo> sorts_;
  std::unordered_map<std::string, SortId> sort_ids_;

  std::vector<std::string> names_;
  std::unordered_map<std::string, int64_t> name_ids_;

  std::vector<FuncInfo> funcs_;
  std::unordered_map<std::string, uint32_t> func_ids_;

  SortId bool_ = 0, int_ = 0, real_ = 0;
  Term true_, false_;

  SortId intern_sort(const SortInfo& si) {
    std::string key;
    switch (si.kind) {
      case SortKind::Array:
        key = "A:" + std::to_string(si.index) + ":" + std::to_string(si.elem);
        break;
      default:
        key = "S:" + si.name;
    }
    auto it = sort_ids_.find(key);
    if (it != sort_ids_.end()) {
      const SortInfo& old = sorts_[it->second];
      if (old.kind != si.kind || old.ctors != si.ctors)
        fail_sort("sort '" + si.name + "' redeclared differently");
      return it->second;
    }
    sorts_.push_back(si);
    SortId id = static_cast<SortId>(sorts_.size() - 1);
    sort_ids_.emplace(key, id);
    return id;
  }

  int64_t name_id(const std::string& n) {
    auto it = name_ids_.find(n);
    if (it != name_ids_.end()) return it->second;
    names_.push_back(n);
    int64_t id = static_cast<int64_t>(names_.size() - 1);
    name_ids_.emplace(n, id);
    return id;
  }

  static std::vector<uint32_t> ids(const std::vector<Term>& ts) {
    std::vector<uint32_t> v(ts.size());
    for (size_t i = 0; i < ts.size(); i++) v[i] = ts[i].id;
    return v;
  }

  Term intern(Op op, SortId sort, int64_t payload, std::vector<uint32_t> children) {
    NodeKey key{op, sort, payload, std::move(children)};
    auto it = intern_map_.find(key);
    if (it != intern_map_.end()) return Term{it->second};
    Node n;
    n.op = op;
    n.sort = sort;
    n.payload = payload;
    n.child_begin = static_cast<uint32_t>(children_.size());
    n.child_count = static_cast<uint32_t>(key.children.size());
    children_.insert(children_.end(), key.children.begin(), key.children.end());
    nodes_.push_back(n);
    uint32_t id = static_cast<uint32_t>(nodes_.size() - 1);
    intern_map_.emplace(std::move(key), id);
    return Term{id};
  }

  void check_bool(Term t, const char* what) {
    if (sort_of(t) != bool_) fail_sort(std::string(what) + " expects Bool operands");
  }

  void check_numeric_one(Term t, const char* what) {
    SortKind k = sort(sort_of(t)).kind;
    if (k != SortKind::Int && k != SortKind::Real)
      fail_sort(std::string(what) + " expects numeric operands");
  }

  void check_numeric(Term a, Term b, const char* what) {
    check_numeric_one(a, what);
    check_numeric_one(b, what);
    if (sort_of(a) != sort_of(b)) fail_sort(std::string(what) + " mixes Int and Real");
  }

  Term mk_nary(Op o, const std::vector<Term>& ts) {
    Term unit = (o == Op::And) ? true_ : false_;
    Term zero = (o == Op::And) ? false_ : true_;
    std::vector<uint32_t> flat;
    std::unordered_set<uint32_t> seen;
    for (Term t : ts) {
      check_bool(t, o == Op::And ? "and" : "or");
      if (t == zero) return zero;
      if (t == unit) continue;
      if (op(t) == o) {
        for (Term c : children(t))
          if (seen.insert(c.id).second) flat.push_back(c.id);
      } else if (seen.insert(t.id).second) {
        flat.push_back(t.id);
      }
    }
    if (flat.empty()) return unit;
    if (flat.size() == 1) return Term{flat[0]};
    return intern(o, bool_, 0, flat);
  }

  // Collect every canonical index `k` such that a variable named i!k occurs
  // anywhere in t (free or bound), except the listed variables themselves.
  // New binders must avoid all of them.
  void used_canonical(Term t, const std::unordered_set<uint32_t>& skip,
                      std::unordered_set<int64_t>& out,
                      std::unordered_set<uint32_t>& visited) {
    if (!visited.insert(t.id).second) return;
    if (op(t) == Op::Var && !skip.count(t.id)) {
      const std::string& n = name_of(t);
      if (is_canonical_name(n)) out.insert(std::strtoll(n.c_str() + 2, nullptr, 10));
    }
    for (size_t i = 0; i < arity(t); i++) used_canonical(child(t, i), skip, out, visited);
  }

  Term mk_binder(Op o, const std::vector<Term>& vars, Term body) {
    check_bool(body, "quantifier body");
    if (vars.empty()) return body;
    std::unordered_set<uint32_t> own;
    for (Term v : vars) {
      if (op(v) != Op::Var) fail_sort("quantifier binds a non-variable");
      if (sort(sort_of(v)).kind != SortKind::Index)
        fail_sort("quantified variables must be index-sorted");
      if (!own.insert(v.id).second) fail_sort("duplicate quantified variable");
    }
    if (body == true_ || body == false_) return body;  // index sorts are nonempty

    std::unordered_set<int64_t> used;
    std::unordered_set<uint32_t> visited;
    used_canonical(body, own, used, visited);
    std::unordered_map<Term, Term, TermHash> rename;
    std::vector<uint32_t> cs;
    int64_t next = 0;
    for (Term v : vars) {
      while (used.count(next)) next++;
      Term cv = mk_var(canonical_name(static_cast<size_t>(next)), sort_of(v));
      used.insert(next);
      if (cv != v) rename.emplace(v, cv);
      cs.push_back(cv.id);
    }
    Term canon_body = rename.empty() ? body : substitute(body, rename);
    cs.push_back(canon_body.id);
    return intern(o, bool_, static_cast<int64_t>(vars.size()), cs);
  }

  Term subst_rec(Term t, const std::unordered_map<Term, Term, TermHash>& map,
                 std::unordered_map<Term, Term, TermHash>& cache) {
    if (map.empty()) return t;
    auto hit = cache.find(t);
    if (hit != cache.end()) return hit->second;
    auto direct = map.find(t);
    if (direct != map.end()) {
      if (sort_of(direct->second) != sort_of(t))
        fail_sort("substitution changes the sort of '" + name_of(t) + "'");
      cache.emplace(t, direct->second);
      return direct->second;
    }
    Term out = t;
    switch (op(t)) {
      case Op::True:
      case Op::False:
      case Op::Var:
      case Op::Const:
      case Op::IntLit:
      case Op::EnumLit:
        break;
      case Op::Forall:
      case Op::Exists: {
        // Bound variables shadow map entries with the same node.
        std::unordered_map<Term, Term, TermHash> inner = map;
        size_t k = binder_arity(t);
        std::vector<Term> vs(k);
        for (size_t i = 0; i < k; i++) {
          vs[i] = binder_var(t, i);
          inner.erase(vs[i]);
        }
        if (inner.empty()) break;
        Term body;
        if (inner.size() == map.size()) {
          body = subst_rec(binder_body(t), inner, cache);
        } else {
          // The effective map shrank, so results under it must not leak into
          // the shared cache.
          std::unordered_map<Term, Term, TermHash> fresh;
          body = subst_rec(binder_body(t), inner, fresh);
        }
        out = mk_binder(op(t), vs, body);
        break;
      }
      default: {
        // Copy the child list first: the recursion interns new nodes, which
        // can reallocate the node store under any reference into it.
        std::vector<Term> cs = children(t);
        bool changed = false;
        for (Term& c : cs) {
          Term r = subst_rec(c, map, cache);
          changed |= r != c;
          c = r;
        }
        if (changed) out = rebuild(t, cs);
        break;
      }
    }
    cache.emplace(t, out);
    return out;
  }

 public:
  // Rebuild a node with new children through the checked builders, so
  // normalization and well-sorting are preserved by every transformation.
  Term rebuild(Term t, const std::vector<Term>& cs) {
    switch (op(t)) {
      case Op::Apply: return mk_apply(static_cast<uint32_t>(payload(t)), cs);
      case Op::Select: return mk_select(cs[0], cs[1]);
      case Op::Next:
        if (op(cs[0]) != Op::Const)
          fail_sort("substitution must map primed state variables to constants");
        return mk_next(cs[0]);
      case Op::Eq: return mk_eq(cs[0], cs[1]);
      case Op::Le: return mk_le(cs[0], cs[1]);
      case Op::Lt: return mk_lt(cs[0], cs[1]);
      case Op::Add: return mk_add(cs);
      case Op::Mul: return mk_mul(payload(cs[0]), cs[1]);
      case Op::Not: return mk_not(cs[0]);
      case Op::And: return mk_and(cs);
      case Op::Or: return mk_or(cs);
      case Op::Implies: return mk_implies(cs[0], cs[1]);
      case Op::Iff: return mk_iff(cs[0], cs[1]);
      case Op::Forall:
      case Op::Exists: {
        std::vector<Term> vs(cs.begin(), cs.end() - 1);
        return mk_binder(op(t), vs, cs.back());
      }
      default: fail_internal("rebuild on a leaf");
    }
  }
};

}  // namespace qivc
