#pragma once

// Term-level operations: occurrence queries, quantifier grounding,
// skolemization, NNF/CNF, and index-constant permutations.

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "qivc/logic/term.hpp"

namespace qivc {

using TermSet = std::set<Term>;
using TermMap = std::unordered_map<Term, Term, TermHash>;

namespace detail {

inline void walk(const TermManager& tm, Term t, std::unordered_set<uint32_t>& seen,
                 const std::function<void(Term)>& visit) {
  if (!seen.insert(t.id).second) return;
  visit(t);
  for (size_t i = 0; i < tm.arity(t); i++) walk(tm, tm.child(t, i), seen, visit);
}

}  // namespace detail

inline void for_each_subterm(const TermManager& tm, Term t,
                             const std::function<void(Term)>& visit) {
  std::unordered_set<uint32_t> seen;
  detail::walk(tm, t, seen, visit);
}

inline size_t term_size(const TermManager& tm, Term t) {
  size_t n = 0;
  for_each_subterm(tm, t, [&](Term) { n++; });
  return n;
}

inline bool contains_next(const TermManager& tm, Term t) {
  bool found = false;
  for_each_subterm(tm, t, [&](Term s) { found |= tm.op(s) == Op::Next; });
  return found;
}

inline bool contains_quantifier(const TermManager& tm, Term t) {
  bool found = false;
  for_each_subterm(tm, t, [&](Term s) { found |= tm.is_binder(s); });
  return found;
}

// Free variables. Bound occurrences are excluded by scope tracking.
inline void free_vars_rec(const TermManager& tm, Term t, std::vector<Term>& bound,
                          TermSet& out) {
  if (tm.op(t) == Op::Var) {
    if (std::find(bound.begin(), bound.end(), t) == bound.end()) out.insert(t);
    return;
  }
  if (tm.is_binder(t)) {
    size_t k = tm.binder_arity(t);
    for (size_t i = 0; i < k; i++) bound.push_back(tm.binder_var(t, i));
    free_vars_rec(tm, tm.binder_body(t), bound, out);
    bound.resize(bound.size() - k);
    return;
  }
  for (size_t i = 0; i < tm.arity(t); i++) free_vars_rec(tm, tm.child(t, i), bound, out);
}

inline TermSet free_vars(const TermManager& tm, Term t) {
  TermSet out;
  std::vector<Term> bound;
  free_vars_rec(tm, t, bound, out);
  return out;
}

inline TermSet constants_in(const TermManager& tm, Term t) {
  TermSet out;
  for_each_subterm(tm, t, [&](Term s) {
    if (tm.op(s) == Op::Const) out.insert(s);
  });
  return out;
}

inline TermSet index_constants_in(TermManager& tm, Term t) {
  TermSet out;
  for_each_subterm(tm, t, [&](Term s) {
    if (tm.op(s) == Op::Const && tm.sort(tm.sort_of(s)).kind == SortKind::Index)
      out.insert(s);
  });
  return out;
}

// Boolean atoms of a quantifier-free formula: maximal Bool subterms that are
// not themselves connectives.
inline bool is_connective(Op o) {
  switch (o) {
    case Op::And:
    case Op::Or:
    case Op::Not:
    case Op::Implies:
    case Op::Iff:
    case Op::True:
    case Op::False:
      return true;
    default:
      return false;
  }
}

inline void collect_atoms(const TermManager& tm, Term t, TermSet& out) {
  if (tm.sort_of(t) == tm.bool_sort() && !is_connective(tm.op(t)) && !tm.is_binder(t)) {
    out.insert(t);
    return;
  }
  if (tm.is_binder(t)) {
    collect_atoms(tm, tm.binder_body(t), out);
    return;
  }
  for (size_t i = 0; i < tm.arity(t); i++) collect_atoms(tm, tm.child(t, i), out);
}

inline TermSet atoms_of(const TermManager& tm, Term t) {
  TermSet out;
  collect_atoms(tm, t, out);
  return out;
}

// Pairwise disequality of the given constants, the standard guard for ground
// instances.
inline Term all_diff(TermManager& tm, const std::vector<Term>& consts) {
  std::vector<Term> lits;
  for (size_t i = 0; i < consts.size(); i++)
    for (size_t j = i + 1; j < consts.size(); j++)
      lits.push_back(tm.mk_not(tm.mk_eq(consts[i], consts[j])));
  return tm.mk_and(lits);
}

// Replaces every quantifier over the index sort by an explicit conjunction
// (forall) or disjunction (exists) over `consts`. Expansion over a fixed
// finite universe is an equivalence, not just equisatisfiability, so the
// rewrite is polarity-independent and proceeds bottom-up.
inline Term ground_quantifiers(TermManager& tm, Term t, const std::vector<Term>& consts) {
  if (tm.is_binder(t)) {
    Term body = ground_quantifiers(tm, tm.binder_body(t), consts);
    size_t k = tm.binder_arity(t);
    std::vector<Term> insts;
    std::vector<size_t> idx(k, 0);
    for (;;) {
      TermMap m;
      for (size_t i = 0; i < k; i++) m.emplace(tm.binder_var(t, i), consts[idx[i]]);
      insts.push_back(tm.substitute(body, m));
      size_t d = 0;
      for (; d < k; d++) {
        if (++idx[d] < consts.size()) break;
        idx[d] = 0;
      }
      if (d == k) break;
    }
    return tm.op(t) == Op::Forall ? tm.mk_and(insts) : tm.mk_or(insts);
  }
  std::vector<Term> cs = tm.children(t);
  bool changed = false;
  for (Term& c : cs) {
    Term g = ground_quantifiers(tm, c, consts);
    changed |= g != c;
    c = g;
  }
  return changed ? tm.rebuild(t, cs) : t;
}

// Negation normal form. Implications and iffs are expanded; quantifiers flip
// under negation.
inline Term to_nnf(TermManager& tm, Term t, bool positive = true) {
  switch (tm.op(t)) {
    case Op::Not:
      return to_nnf(tm, tm.child(t, 0), !positive);
    case Op::And:
    case Op::Or: {
      std::vector<Term> cs;
      for (Term c : tm.children(t)) cs.push_back(to_nnf(tm, c, positive));
      bool is_and = (tm.op(t) == Op::And) == positive;
      return is_and ? tm.mk_and(cs) : tm.mk_or(cs);
    }
    case Op::Implies: {
      Term a = to_nnf(tm, tm.child(t, 0), !positive);
      Term b = to_nnf(tm, tm.child(t, 1), positive);
      return positive ? tm.mk_or(a, b) : tm.mk_and(a, b);
    }
    case Op::Iff: {
      Term a = tm.child(t, 0), b = tm.child(t, 1);
      Term pa = to_nnf(tm, a, true), na = to_nnf(tm, a, false);
      Term pb = to_nnf(tm, b, true), nb = to_nnf(tm, b, false);
      if (positive) return tm.mk_or(tm.mk_and(pa, pb), tm.mk_and(na, nb));
      return tm.mk_or(tm.mk_and(pa, nb), tm.mk_and(na, pb));
    }
    case Op::Forall:
    case Op::Exists: {
      Term body = to_nnf(tm, tm.binder_body(t), positive);
      size_t k = tm.binder_arity(t);
      std::vector<Term> vs(k);
      for (size_t i = 0; i < k; i++) vs[i] = tm.binder_var(t, i);
      bool is_forall = (tm.op(t) == Op::Forall) == positive;
      return is_forall ? tm.mk_forall(vs, body) : tm.mk_exists(vs, body);
    }
    default:
      return positive ? t : tm.mk_not(t);
  }
}

// Skolemization of the NNF of `t`: positive existentials become fresh
// constants, or fresh function applications when universals are in scope.
// Returns the skolemized formula and appends the introduced constants of
// index sort to `skolem_consts` when requested.
inline Term skolemize_rec(TermManager& tm, Term t, std::vector<Term>& univ,
                          const std::string& prefix, int& counter,
                          std::vector<Term>* intro) {
  if (tm.op(t) == Op::Exists) {
    size_t k = tm.binder_arity(t);
    TermMap m;
    for (size_t i = 0; i < k; i++) {
      Term v = tm.binder_var(t, i);
      std::string name = prefix + std::to_string(counter++);
      Term repl;
      if (univ.empty()) {
        repl = tm.mk_const(name, tm.sort_of(v));
      } else {
        std::vector<SortId> args;
        for (Term u : univ) args.push_back(tm.sort_of(u));
        uint32_t f = tm.mk_func(name, args, tm.sort_of(v));
        repl = tm.mk_apply(f, univ);
      }
      if (intro) intro->push_back(repl);
      m.emplace(v, repl);
    }
    Term body = tm.substitute(tm.binder_body(t), m);
    return skolemize_rec(tm, body, univ, prefix, counter, intro);
  }
  if (tm.op(t) == Op::Forall) {
    size_t k = tm.binder_arity(t);
    std::vector<Term> vs(k);
    for (size_t i = 0; i < k; i++) {
      vs[i] = tm.binder_var(t, i);
      univ.push_back(vs[i]);
    }
    Term body = skolemize_rec(tm, tm.binder_body(t), univ, prefix, counter, intro);
    univ.resize(univ.size() - k);
    return tm.mk_forall(vs, body);
  }
  std::vector<Term> cs = tm.children(t);
  bool changed = false;
  for (Term& c : cs) {
    Term g = skolemize_rec(tm, c, univ, prefix, counter, intro);
    changed |= g != c;
    c = g;
  }
  return changed ? tm.rebuild(t, cs) : t;
}

inline Term skolemize(TermManager& tm, Term t, const std::string& prefix,
                      std::vector<Term>* intro = nullptr) {
  Term nnf = to_nnf(tm, t);
  std::vector<Term> univ;
  int counter = 0;
  return skolemize_rec(tm, nnf, univ, prefix, counter, intro);
}

// CNF by distribution, for quantifier-free formulas of moderate size.
// Returns a list of clauses (each a disjunction of literals).
inline std::vector<std::vector<Term>> to_cnf(TermManager& tm, Term t,
                                             size_t max_clauses = 100000) {
  Term nnf = to_nnf(tm, t);
  std::function<std::vector<std::vector<Term>>(Term)> go =
      [&](Term u) -> std::vector<std::vector<Term>> {
    switch (tm.op(u)) {
      case Op::True:
        return {};
      case Op::False:
        return {{}};
      case Op::And: {
        std::vector<std::vector<Term>> out;
        for (Term c : tm.children(u)) {
          auto sub = go(c);
          out.insert(out.end(), sub.begin(), sub.end());
          if (out.size() > max_clauses) fail_resource("CNF conversion exceeded budget");
        }
        return out;
      }
      case Op::Or: {
        std::vector<std::vector<Term>> out{{}};
        for (Term c : tm.children(u)) {
          auto sub = go(c);
          std::vector<std::vector<Term>> next;
          for (const auto& a : out)
            for (const auto& b : sub) {
              std::vector<Term> merged = a;
              merged.insert(merged.end(), b.begin(), b.end());
              next.push_back(std::move(merged));
            }
          out = std::move(next);
          if (out.size() > max_clauses) fail_resource("CNF conversion exceeded budget");
        }
        return out;
      }
      default:
        if (tm.is_binder(u)) fail_sort("CNF conversion expects a quantifier-free formula");
        return {{u}};
    }
  };
  return go(nnf);
}

inline Term clause_to_term(TermManager& tm, const std::vector<Term>& clause) {
  return tm.mk_or(clause);
}

// ---- permutations of index constants ----

struct Permutation {
  std::vector<size_t> map;  // position i goes to map[i]

  static Permutation identity(size_t n) {
    Permutation p;
    p.map.resize(n);
    for (size_t i = 0; i < n; i++) p.map[i] = i;
    return p;
  }

  Permutation compose(const Permutation& other) const {
    // (this ∘ other)(i) = this(other(i))
    Permutation p;
    p.map.resize(map.size());
    for (size_t i = 0; i < map.size(); i++) p.map[i] = map[other.map[i]];
    return p;
  }

  Permutation inverse() const {
    Permutation p;
    p.map.resize(map.size());
    for (size_t i = 0; i < map.size(); i++) p.map[map[i]] = i;
    return p;
  }

  bool is_identity() const {
    for (size_t i = 0; i < map.size(); i++)
      if (map[i] != i) return false;
    return true;
  }

  bool operator==(const Permutation& o) const { return map == o.map; }
};

inline std::vector<Permutation> all_permutations(size_t n) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; i++) idx[i] = i;
  std::vector<Permutation> out;
  do {
    out.push_back(Permutation{idx});
  } while (std::next_permutation(idx.begin(), idx.end()));
  return out;
}

// Applies a permutation of the listed constants to a term: occurrences of
// consts[i] become consts[perm.map[i]], simultaneously.
inline Term apply_permutation(TermManager& tm, Term t, const std::vector<Term>& consts,
                              const Permutation& perm) {
  if (perm.map.size() != consts.size())
    fail_internal("permutation arity does not match the constant list");
  TermMap m;
  for (size_t i = 0; i < consts.size(); i++)
    if (perm.map[i] != i) m.emplace(consts[i], consts[perm.map[i]]);
  if (m.empty()) return t;
  return tm.substitute(t, m);
}

}  // namespace qivc
