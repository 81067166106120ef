#pragma once

// Sequence interpolation by model projection. For an unsatisfiable chain
// A_1, ..., A_m the i-th interpolant is built as the disjunction of the
// projections of all models of (itp_{i-1} and A_i) onto a pool of atoms over
// the symbols shared between the prefix and the suffix: every model
// contributes the conjunction of the pool atoms as it evaluates them, and
// models are enumerated until none is left. By construction each interpolant
// is implied by its predecessor conjoined with the next link; whether the
// final interpolant refutes A_m depends on the pool being expressive enough,
// so that is checked and failure reported as a capability error, which
// callers treat as "interpolation unavailable" and fall back on cores.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "qivc/fm/engine.hpp"
#include "qivc/logic/ops.hpp"
#include "qivc/logic/print.hpp"

namespace qivc::fm {

namespace detail {

inline void symbols_of(const TermManager& tm, Term t, std::set<std::string>& out) {
  for_each_subterm(tm, t, [&](Term s) {
    if (tm.op(s) == Op::Const) out.insert(tm.name_of(s));
    if (tm.op(s) == Op::Apply) out.insert(tm.func(s).name);
  });
}

inline bool symbols_within(const TermManager& tm, Term t,
                           const std::set<std::string>& allowed) {
  bool ok = true;
  for_each_subterm(tm, t, [&](Term s) {
    if (tm.op(s) == Op::Const && !allowed.count(tm.name_of(s))) ok = false;
    if (tm.op(s) == Op::Apply && !allowed.count(tm.func(s).name)) ok = false;
  });
  return ok;
}

// Ground non-boolean subterms usable in derived atoms: no variables, no
// quantifiers, symbols within the shared set. Integer literals count; they
// let the pool express bounds like 1 <= x.
inline void shared_terms_of(TermManager& tm, Term t, const std::set<std::string>& shared,
                            std::set<Term>& out) {
  for_each_subterm(tm, t, [&](Term s) {
    if (tm.sort_of(s) == tm.bool_sort()) return;
    SortKind kind = tm.sort(tm.sort_of(s)).kind;
    if (kind == SortKind::Array) return;
    if (tm.op(s) == Op::Var) return;
    if (!free_vars(tm, s).empty()) return;
    if (!symbols_within(tm, s, shared)) return;
    out.insert(s);
  });
}

}  // namespace detail

// Interpolants for the chain of `groups`; groups.size() - 1 formulas.
inline std::vector<Term> sequence_interpolants(FmEngine& eng,
                                               const std::vector<Term>& groups,
                                               size_t atom_cap = 160,
                                               size_t cube_cap = 500) {
  TermManager& tm = eng.tm();
  size_t m = groups.size();
  if (m < 2) fail_input("interpolation needs at least two groups");

  std::vector<std::set<std::string>> syms(m);
  for (size_t i = 0; i < m; i++) detail::symbols_of(tm, groups[i], syms[i]);

  std::vector<Term> out;
  Term prev = tm.mk_true();
  for (size_t i = 0; i + 1 < m; i++) {
    // shared vocabulary between groups 0..i and groups i+1..m-1
    std::set<std::string> left, right, shared;
    for (size_t j = 0; j <= i; j++) left.insert(syms[j].begin(), syms[j].end());
    for (size_t j = i + 1; j < m; j++) right.insert(syms[j].begin(), syms[j].end());
    std::set_intersection(left.begin(), left.end(), right.begin(), right.end(),
                          std::inserter(shared, shared.begin()));

    // atom pool: shared-symbol atoms of every group, then derived equalities
    // and orderings among shared ground terms of equal sort, capped
    // deterministically; orderings matter for counter protocols whose safety
    // argument is an inequality no group states verbatim
    std::set<Term> pool_set;
    for (Term g : groups) {
      for (Term a : atoms_of(tm, g))
        if (free_vars(tm, a).empty() && detail::symbols_within(tm, a, shared))
          pool_set.insert(a);
    }
    std::set<Term> shared_terms;
    for (Term g : groups) detail::shared_terms_of(tm, g, shared, shared_terms);
    std::vector<Term> sts(shared_terms.begin(), shared_terms.end());
    auto offer = [&](Term a) {
      if (pool_set.size() >= atom_cap) return;
      if (tm.op(a) == Op::True || tm.op(a) == Op::False) return;
      pool_set.insert(a);
    };
    for (size_t a = 0; a < sts.size(); a++)
      for (size_t b = a + 1; b < sts.size(); b++) {
        if (tm.sort_of(sts[a]) != tm.sort_of(sts[b])) continue;
        offer(tm.mk_eq(sts[a], sts[b]));
        if (tm.sort_of(sts[a]) == tm.int_sort()) {
          offer(tm.mk_le(sts[a], sts[b]));
          offer(tm.mk_le(sts[b], sts[a]));
        }
      }
    std::vector<Term> pool(pool_set.begin(), pool_set.end());
    if (pool.size() > atom_cap) pool.resize(atom_cap);

    // enumerate the projections of all models of prev /\ A_i
    Term link = tm.mk_and(prev, groups[i]);
    std::vector<Term> cubes;
    for (;;) {
      std::vector<Term> blocked{link};
      for (Term c : cubes) blocked.push_back(tm.mk_not(c));
      EngineOutcome r = eng.solve_formulas({tm.mk_and(blocked)});
      if (r.verdict == Verdict::Unknown)
        fail_capability("interpolation query has no universe bound");
      if (r.verdict == Verdict::Unsat) break;
      std::vector<Term> lits;
      for (Term a : pool) {
        Value v = eng.eval_in(r.model, a);
        lits.push_back(v.b ? a : tm.mk_not(a));
      }
      cubes.push_back(tm.mk_and(lits));
      if (cubes.size() > cube_cap)
        fail_capability("interpolation projection exceeded the cube budget");
    }
    Term itp = tm.mk_or(cubes);
    out.push_back(itp);
    prev = itp;
  }

  EngineOutcome fin = eng.solve_formulas({tm.mk_and(prev, groups.back())});
  if (fin.verdict != Verdict::Unsat)
    fail_capability("interpolation vocabulary cannot separate the chain");
  return out;
}

}  // namespace qivc::fm
