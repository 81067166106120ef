#pragma once

// Ground n-instances of array-based systems, and the symmetry facts used to
// prune work on them. An instance freezes n fresh pairwise-distinct index
// constants __idx_0..__idx_{n-1}, rewrites universal quantifiers into
// conjunctions and existentials into disjunctions over them, and conjoins
// totality constraints for every state symbol whose values are of index
// sort: each such value must be one of the frozen constants. Totality is
// imposed on both current and next occurrences in the transition relation so
// that every state along a trace stays inside the finite universe. The
// frozen constants are kept as rigid (unprimed) symbols, which realizes
// their frame condition without extra equations.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "qivc/logic/ops.hpp"
#include "qivc/logic/print.hpp"
#include "qivc/smt/solver.hpp"
#include "qivc/system/system.hpp"

namespace qivc::sys {

struct GroundInstance {
  const ArraySystem* parent = nullptr;
  int size = 0;
  std::vector<Term> consts;    // __idx_0 .. __idx_{n-1}
  Term all_diff;               // pairwise disequality of consts
  Term init_g;                 // grounded init with totality conjuncts
  std::vector<Term> trans_g;   // flattened grounded disjuncts, no totality
  Term trans_g_or;             // their disjunction with totality conjuncts
  Term prop_g;                 // grounded property
};

// Current- and next-state vocabularies for quantifier-free uses of an
// instance: next(x) occurrences are replaced by a fresh primed constant.
struct PrimedVocab {
  TermMap to_primed;   // state constant -> primed constant
  TermMap next_map;    // next(state constant) -> primed constant
  std::vector<Term> primed;
};

inline PrimedVocab make_primed(TermManager& tm, const ArraySystem& s,
                               const std::string& suffix = "@n") {
  PrimedVocab v;
  for (const StateVar& sv : s.vars) {
    Term p = tm.mk_const(sv.name + suffix, tm.sort_of(sv.sym));
    v.to_primed.emplace(sv.sym, p);
    v.next_map.emplace(tm.mk_next(sv.sym), p);
    v.primed.push_back(p);
  }
  return v;
}

// next(x) -> x', yielding a two-vocabulary quantifier-free formula.
inline Term strip_next(TermManager& tm, Term f, const PrimedVocab& v) {
  return tm.substitute(f, v.next_map);
}

// x -> x', turning a state formula into its next-state copy.
inline Term prime_state(TermManager& tm, Term f, const PrimedVocab& v) {
  return tm.substitute(f, v.to_primed);
}

namespace detail {

inline void flatten_or(const TermManager& tm, Term t, std::vector<Term>& out) {
  if (tm.op(t) == Op::Or) {
    for (Term c : tm.children(t)) flatten_or(tm, c, out);
  } else {
    out.push_back(t);
  }
}

// Grounded totality of one index-valued symbol: every reachable application
// takes one of the universe constants as value.
inline Term totality_of(TermManager& tm, Term x, const std::vector<Term>& consts,
                        bool primed) {
  Term sym = primed ? tm.mk_next(x) : x;
  auto one_of = [&](Term app) {
    std::vector<Term> eqs;
    for (Term c : consts) eqs.push_back(tm.mk_eq(app, c));
    return tm.mk_or(eqs);
  };
  const SortInfo& si = tm.sort(tm.sort_of(x));
  if (si.kind == SortKind::Index) return one_of(sym);
  std::vector<Term> per_cell;
  for (Term c : consts) per_cell.push_back(one_of(tm.mk_select(sym, c)));
  return tm.mk_and(per_cell);
}

}  // namespace detail

inline GroundInstance build_ground_instance(const ArraySystem& s, int n) {
  if (n < 1) fail_input("ground instances need at least one index element");
  TermManager& tm = *s.tm;
  GroundInstance g;
  g.parent = &s;
  g.size = n;
  if (s.index_sort != 0)
    for (int k = 0; k < n; k++)
      g.consts.push_back(tm.mk_const("__idx_" + std::to_string(k), s.index_sort));
  g.all_diff = all_diff(tm, g.consts);

  auto ground = [&](Term f) { return ground_quantifiers(tm, f, g.consts); };

  std::vector<Term> idx_vars = s.index_codomain_vars();
  std::vector<Term> tot_cur, tot_next;
  for (Term x : idx_vars) {
    tot_cur.push_back(detail::totality_of(tm, x, g.consts, false));
    tot_next.push_back(detail::totality_of(tm, x, g.consts, true));
  }

  Term init = ground(s.init);
  g.init_g = tot_cur.empty() ? init : tm.mk_and({init, tm.mk_and(tot_cur)});

  for (Term d : s.trans) detail::flatten_or(tm, ground(d), g.trans_g);
  Term tor = tm.mk_or(g.trans_g);
  if (!tot_cur.empty())
    tor = tm.mk_and({tor, tm.mk_and(tot_cur), tm.mk_and(tot_next)});
  g.trans_g_or = tor;

  g.prop_g = ground(s.prop);
  return g;
}

// Registers everything a solver needs to work with instance formulas: the
// index sort, enum sorts, state variables, the frozen index constants, and
// (when given) the primed copies.
inline void declare_instance(smt::Solver& sol, const GroundInstance& g,
                             const PrimedVocab* pv = nullptr) {
  const ArraySystem& s = *g.parent;
  TermManager& tm = *s.tm;
  if (s.index_sort != 0) sol.declare_index_sort(tm.sort(s.index_sort).name);
  for (SortId es : s.enum_sorts) sol.declare_enum_sort(es);
  for (const StateVar& v : s.vars) sol.register_const(v.sym);
  for (Term c : g.consts) sol.register_const(c);
  if (pv)
    for (Term p : pv->primed) sol.register_const(p);
}

// ---- symmetry ----

// All structurally distinct images of a formula under permutations of the
// instance constants; the orbit of the formula under the symmetry group.
inline std::vector<Term> symmetric_closure(TermManager& tm, Term clause,
                                           const std::vector<Term>& consts) {
  std::set<Term> seen;
  std::vector<Term> out;
  for (const Permutation& p : all_permutations(consts.size())) {
    Term img = apply_permutation(tm, clause, consts, p);
    if (seen.insert(img).second) out.push_back(img);
  }
  return out;
}

// One representative per permutation orbit, keeping first occurrences.
inline std::vector<Term> reduce_by_symmetry(TermManager& tm,
                                            const std::vector<Term>& props,
                                            const std::vector<Term>& consts) {
  std::set<Term> covered;
  std::vector<Term> out;
  for (Term f : props) {
    if (covered.count(f)) continue;
    out.push_back(f);
    for (Term img : symmetric_closure(tm, f, consts)) covered.insert(img);
  }
  return out;
}

// True when permuting the listed constants leaves the formula equivalent
// under the side condition (usually their distinctness).
inline bool symmetry_holds(smt::Solver& sol, TermManager& tm, Term f,
                           const std::vector<Term>& consts,
                           const Permutation& sigma, Term side) {
  Term img = apply_permutation(tm, f, consts, sigma);
  sol.push();
  sol.assert_term(side);
  sol.assert_term(tm.mk_not(tm.mk_iff(img, f)));
  smt::Verdict v = sol.check_sat();
  sol.pop();
  return v == smt::Verdict::Unsat;
}

// Checks that permuting the instance constants leaves the grounded initial
// and transition formulas equivalent under the distinctness assumption; a
// self-test for the orbit-based pruning, not a hot-path operation.
inline bool check_symmetry_lemma(smt::Solver& sol, const ArraySystem& s, int n,
                                 const Permutation& sigma) {
  TermManager& tm = *s.tm;
  GroundInstance g = build_ground_instance(s, n);
  PrimedVocab pv = make_primed(tm, s);
  declare_instance(sol, g, &pv);
  Term tau = strip_next(tm, g.trans_g_or, pv);
  return symmetry_holds(sol, tm, g.init_g, g.consts, sigma, g.all_diff) &&
         symmetry_holds(sol, tm, tau, g.consts, sigma, g.all_diff);
}

// ---- textual export ----

// Writes an instance back out in the system format, reparseable by
// parse_system: the frozen constants become declared frozen variables, their
// distinctness joins the initial formula, and the grounded relation keeps
// its (next ...) occurrences.
inline std::string export_instance_text(const GroundInstance& g) {
  const ArraySystem& s = *g.parent;
  TermManager& tm = *s.tm;
  std::ostringstream os;
  os << "; ground instance of size " << g.size << "\n";
  if (s.index_sort != 0)
    os << "(declare-index-sort " << tm.sort(s.index_sort).name << ")\n";
  for (SortId es : s.enum_sorts) {
    os << "(declare-enum-sort " << tm.sort(es).name << " (";
    bool first = true;
    for (const std::string& c : tm.sort(es).ctors) {
      if (!first) os << " ";
      os << c;
      first = false;
    }
    os << "))\n";
  }
  for (const StateVar& v : s.vars)
    os << "(declare-var " << v.name << " " << tm.sort_name(tm.sort_of(v.sym))
       << ")\n";
  for (Term c : g.consts)
    os << "(declare-frozen " << tm.name_of(c) << " "
       << tm.sort_name(tm.sort_of(c)) << ")\n";
  Term init = tm.mk_and({g.all_diff, g.init_g});
  os << "(init " << print_term(tm, init, PrintStyle::System) << ")\n";
  os << "(trans " << print_term(tm, g.trans_g_or, PrintStyle::System) << ")\n";
  os << "(prop " << print_term(tm, g.prop_g, PrintStyle::System) << ")\n";
  return os.str();
}

}  // namespace qivc::sys
