#pragma once

// Quantifier-free overapproximation of an array-based system for candidate
// invariant checking. The universal prefix of the candidate is replaced by
// frozen prophecy variables, transitions gain the candidate itself as a
// guard, and existentially quantified indices are enumerated over the
// prophecies plus a set of mutable environmental variables. Array state is
// projected onto the tracked locations as per-location scalars, and an extra
// stuttering transition lets the environmental variables retarget while the
// prophecy locations stay put. Safety of the abstraction implies the
// candidate holds on every instance large enough to keep the tracked
// locations apart; smaller instances are checked directly.

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qivc/check/pdr.hpp"
#include "qivc/logic/ops.hpp"
#include "qivc/logic/print.hpp"
#include "qivc/system/ground.hpp"
#include "qivc/system/system.hpp"
#include "qivc/util/error.hpp"

namespace qivc::engine {

struct ShapeVerdict {
  bool accepted = false;
  std::string reason;
};

namespace detail {

inline bool has_exists(const TermManager& tm, Term nnf) {
  bool found = false;
  for_each_subterm(tm, nnf, [&](Term t) { found |= tm.op(t) == Op::Exists; });
  return found;
}

inline bool exists_under_forall(const TermManager& tm, Term nnf,
                                bool under = false) {
  if (tm.op(nnf) == Op::Exists && under) return true;
  if (tm.is_binder(nnf))
    return exists_under_forall(tm, tm.binder_body(nnf),
                               under || tm.op(nnf) == Op::Forall);
  for (Term c : tm.children(nnf))
    if (exists_under_forall(tm, c, under)) return true;
  return false;
}

// Environmental variables needed by one transition disjunct: conjoined
// existentials fire together and add up, disjoined ones fire one at a time.
inline size_t exists_width(const TermManager& tm, Term nnf) {
  switch (tm.op(nnf)) {
    case Op::Exists:
      return tm.binder_arity(nnf) + exists_width(tm, tm.binder_body(nnf));
    case Op::Forall:
      return exists_width(tm, tm.binder_body(nnf));
    case Op::And: {
      size_t w = 0;
      for (Term c : tm.children(nnf)) w += exists_width(tm, c);
      return w;
    }
    case Op::Or: {
      size_t w = 0;
      for (Term c : tm.children(nnf)) w = std::max(w, exists_width(tm, c));
      return w;
    }
    default:
      return 0;
  }
}

// Prophecies needed to open every universal at once: conjuncts can share a
// slot block, disjuncts need their own.
inline size_t universal_width(const TermManager& tm, Term nnf) {
  switch (tm.op(nnf)) {
    case Op::Forall:
      return tm.binder_arity(nnf) + universal_width(tm, tm.binder_body(nnf));
    case Op::Exists:
      return universal_width(tm, tm.binder_body(nnf));
    case Op::And: {
      size_t w = 0;
      for (Term c : tm.children(nnf)) w = std::max(w, universal_width(tm, c));
      return w;
    }
    case Op::Or: {
      size_t w = 0;
      for (Term c : tm.children(nnf)) w += universal_width(tm, c);
      return w;
    }
    default:
      return 0;
  }
}

// Replaces every universally bound variable of an NNF universal formula by
// one slot constant, sharing slots across conjuncts and splitting them
// across disjuncts; a single instantiation, not an expansion.
inline Term open_universals(TermManager& tm, Term nnf,
                            const std::vector<Term>& slots, size_t offset) {
  switch (tm.op(nnf)) {
    case Op::Forall: {
      size_t k = tm.binder_arity(nnf);
      Term body = open_universals(tm, tm.binder_body(nnf), slots, offset + k);
      TermMap m;
      for (size_t i = 0; i < k; i++)
        m.emplace(tm.binder_var(nnf, i), slots[offset + i]);
      return tm.substitute(body, m);
    }
    case Op::And: {
      std::vector<Term> cs;
      for (Term c : tm.children(nnf))
        cs.push_back(open_universals(tm, c, slots, offset));
      return tm.mk_and(cs);
    }
    case Op::Or: {
      std::vector<Term> cs;
      for (Term c : tm.children(nnf)) {
        cs.push_back(open_universals(tm, c, slots, offset));
        offset += universal_width(tm, c);
      }
      return tm.mk_or(cs);
    }
    default:
      return nnf;
  }
}

// Hoists every existential binder not under a universal, renaming the bound
// variables apart; `out` collects (display name, fresh variable) pairs.
inline Term strip_exists(TermManager& tm, Term nnf,
                         std::vector<std::pair<std::string, Term>>& out) {
  if (tm.op(nnf) == Op::Exists) {
    size_t k = tm.binder_arity(nnf);
    TermMap m;
    for (size_t i = 0; i < k; i++) {
      Term v = tm.binder_var(nnf, i);
      Term fresh = tm.mk_var(tm.name_of(v) + "#" + std::to_string(out.size()),
                             tm.sort_of(v));
      out.emplace_back(tm.name_of(v), fresh);
      m.emplace(v, fresh);
    }
    Term body = tm.substitute(tm.binder_body(nnf), m);
    return strip_exists(tm, body, out);
  }
  if (tm.op(nnf) == Op::Forall) return nnf;
  std::vector<Term> cs = tm.children(nnf);
  bool changed = false;
  for (Term& c : cs) {
    Term g = strip_exists(tm, c, out);
    changed |= g != c;
    c = g;
  }
  return changed ? tm.rebuild(nnf, cs) : nnf;
}

// Quantifier expansion over the tracked locations; over an empty set
// universals hold vacuously (callers ensure no existential reaches this).
inline Term ground_tracked(TermManager& tm, Term t,
                           const std::vector<Term>& locs) {
  if (!locs.empty()) return ground_quantifiers(tm, t, locs);
  if (tm.is_binder(t)) {
    if (tm.op(t) == Op::Exists)
      fail_internal("existential survives with no tracked locations");
    return tm.mk_true();
  }
  std::vector<Term> cs = tm.children(t);
  bool changed = false;
  for (Term& c : cs) {
    Term g = ground_tracked(tm, c, locs);
    changed |= g != c;
    c = g;
  }
  return changed ? tm.rebuild(t, cs) : t;
}

inline std::string fresh_name(const sys::ArraySystem& s, std::string base) {
  while (s.find(base) || s.env.consts.count(base)) base = "_" + base;
  return base;
}

// Prophecies pairwise apart and the environment apart from them; the
// environmental variables may coincide with each other.
inline Term tracked_distinct(TermManager& tm, const std::vector<Term>& ps,
                             const std::vector<Term>& es) {
  std::vector<Term> lits;
  for (size_t i = 0; i < ps.size(); i++)
    for (size_t j = i + 1; j < ps.size(); j++)
      lits.push_back(tm.mk_not(tm.mk_eq(ps[i], ps[j])));
  for (Term p : ps)
    for (Term e : es) lits.push_back(tm.mk_not(tm.mk_eq(p, e)));
  return tm.mk_and(lits);
}

// Rewrites a ground two-vocabulary formula over the abstract state: array
// reads become per-location scalars, next markers become primed constants,
// and equalities between whole arrays are expanded pointwise over the
// tracked locations.
struct Scalarizer {
  TermManager& tm;
  TermSet tracked;
  std::map<std::pair<Term, Term>, Term> cell;  // (array symbol, location)
  TermMap primed;                              // abstract var -> primed copy

  Term operator()(Term t) {
    switch (tm.op(t)) {
      case Op::Select: {
        Term arr = tm.child(t, 0);
        Term idx = tm.child(t, 1);
        if (!tracked.count(idx))
          fail_input("parameter abstraction cannot track the array access " +
                     print_term(tm, t, PrintStyle::System));
        bool next = tm.op(arr) == Op::Next;
        Term sym = next ? tm.child(arr, 0) : arr;
        auto it = cell.find({sym, idx});
        if (it == cell.end()) fail_internal("array read misses its cell");
        return next ? primed.at(it->second) : it->second;
      }
      case Op::Next: {
        auto it = primed.find(tm.child(t, 0));
        if (it == primed.end()) fail_internal("next marker on a non-state term");
        return it->second;
      }
      case Op::Eq: {
        if (tm.sort(tm.sort_of(tm.child(t, 0))).kind == SortKind::Array) {
          std::vector<Term> cells;
          for (const auto& [key, scalar] : cell) {
            (void)scalar;
            if (!same_array(key.first, tm.child(t, 0))) continue;
            Term l = key.second;
            cells.push_back((*this)(tm.mk_eq(
                tm.mk_select(tm.child(t, 0), l),
                tm.mk_select(tm.child(t, 1), l))));
          }
          return tm.mk_and(cells);
        }
        break;
      }
      default:
        break;
    }
    std::vector<Term> cs = tm.children(t);
    bool changed = false;
    for (Term& c : cs) {
      Term g = (*this)(c);
      changed |= g != c;
      c = g;
    }
    return changed ? tm.rebuild(t, cs) : t;
  }

  bool same_array(Term sym, Term side) const {
    Term s = tm.op(side) == Op::Next ? tm.child(side, 0) : side;
    return s == sym;
  }
};

}  // namespace detail

// Accepts systems whose property and initial formula are universal and whose
// transition disjuncts keep every existential outside all universals.
inline ShapeVerdict check_hypotheses(const sys::ArraySystem& s) {
  TermManager& tm = *s.tm;
  if (detail::has_exists(tm, to_nnf(tm, s.prop)))
    return {false, "the property is not a universal formula"};
  if (detail::has_exists(tm, to_nnf(tm, s.init)))
    return {false, "the initial formula is not a universal formula"};
  for (size_t k = 0; k < s.trans.size(); k++)
    if (detail::exists_under_forall(tm, to_nnf(tm, s.trans[k])))
      return {false, "transition disjunct " + std::to_string(k + 1) +
                         " has an existential inside a universal"};
  return {true, ""};
}

// Conjoins the property to every transition disjunct. Behaviors only shrink,
// so an invariant of the strengthened system is an invariant of the original.
inline sys::ArraySystem guard_strengthen(const sys::ArraySystem& s) {
  sys::ArraySystem out = s;
  for (Term& d : out.trans) d = s.tm->mk_and(d, s.prop);
  return out;
}

struct Prophecied {
  sys::ArraySystem system;
  std::vector<Term> prophecies;
};

// Replaces the universal prefix of the property by fresh frozen index
// variables: the property holds for every valuation of the frozen variables
// exactly when the universal one is invariant.
inline Prophecied introduce_prophecies(const sys::ArraySystem& s) {
  TermManager& tm = *s.tm;
  Term nnf = to_nnf(tm, s.prop);
  if (detail::has_exists(tm, nnf))
    fail_input("prophecy introduction needs a universal property");
  size_t w = detail::universal_width(tm, nnf);
  Prophecied out{s, {}};
  if (w == 0) return out;
  if (s.index_sort == 0)
    fail_internal("quantified property over a system without an index sort");
  std::vector<Term> frames;
  for (size_t i = 0; i < w; i++) {
    std::string name = detail::fresh_name(out.system, "p" + std::to_string(i + 1));
    Term p = tm.mk_const(name, s.index_sort);
    out.prophecies.push_back(p);
    out.system.vars.push_back(sys::StateVar{name, p, true});
    out.system.env.consts.emplace(name, p);
    frames.push_back(tm.mk_eq(tm.mk_next(p), p));
  }
  Term frame = tm.mk_and(frames);
  for (Term& d : out.system.trans) d = tm.mk_and(d, frame);
  out.system.prop = detail::open_universals(tm, nnf, out.prophecies, 0);
  return out;
}

struct AbsSystem {
  check::QfSystem qf;
  std::vector<Term> prophecies;
  std::vector<Term> env_vars;
  std::vector<std::string> substitution_log;  // one entry per transition disjunct
};

// Builds the quantifier-free abstraction of a guard-strengthened, prophecied
// system: existentials are enumerated over the tracked locations, remaining
// universals are expanded over them, arrays shrink to per-location scalars,
// and a stuttering disjunct frees only the environment.
inline AbsSystem build_abstraction(const sys::ArraySystem& s,
                                   const std::vector<Term>& prophecies) {
  TermManager& tm = *s.tm;
  ShapeVerdict hv = check_hypotheses(s);
  if (!hv.accepted) fail_input("parameter abstraction: " + hv.reason);
  if (contains_quantifier(tm, s.prop))
    fail_input("introduce prophecies before building the abstraction");
  for (Term p : prophecies) {
    bool frozen = false;
    for (const sys::StateVar& v : s.vars)
      if (v.sym == p) frozen = v.frozen;
    if (!frozen)
      fail_input("prophecy variables must be frozen state variables");
  }

  size_t ew = 0;
  for (Term d : s.trans)
    ew = std::max(ew, detail::exists_width(tm, to_nnf(tm, d)));
  std::vector<Term> envs;
  for (size_t i = 0; i < ew; i++) {
    std::string name = detail::fresh_name(s, "e" + std::to_string(i + 1));
    envs.push_back(tm.mk_const(name, s.index_sort));
  }
  std::vector<Term> locs = prophecies;
  locs.insert(locs.end(), envs.begin(), envs.end());

  detail::Scalarizer sc{tm, TermSet(locs.begin(), locs.end()), {}, {}};
  std::vector<Term> avars, aprimed;
  auto add_var = [&](const std::string& name, Term sym) {
    avars.push_back(sym);
    Term pr = tm.mk_const(name + "@n", tm.sort_of(sym));
    aprimed.push_back(pr);
    sc.primed.emplace(sym, pr);
  };
  for (const sys::StateVar& v : s.vars) {
    const SortInfo& si = tm.sort(tm.sort_of(v.sym));
    if (si.kind != SortKind::Array) {
      add_var(v.name, v.sym);
      continue;
    }
    for (Term l : locs) {
      std::string name = v.name + "@" + tm.name_of(l);
      Term c = tm.mk_const(name, si.elem);
      sc.cell.emplace(std::make_pair(v.sym, l), c);
      add_var(name, c);
    }
  }
  for (Term e : envs) add_var(tm.name_of(e), e);

  Term dist = detail::tracked_distinct(tm, prophecies, envs);
  Term dist_next = tm.substitute(dist, sc.primed);

  std::vector<Term> adis;
  std::vector<std::string> log;
  for (size_t k = 0; k < s.trans.size(); k++) {
    std::vector<std::pair<std::string, Term>> evars;
    Term body = detail::strip_exists(tm, to_nnf(tm, s.trans[k]), evars);
    std::vector<size_t> pick(evars.size(), 0);
    for (;;) {
      TermMap m;
      std::ostringstream lab;
      lab << "rule " << k + 1;
      for (size_t i = 0; i < evars.size(); i++) {
        m.emplace(evars[i].second, locs[pick[i]]);
        lab << (i == 0 ? ": " : ", ") << evars[i].first << "->"
            << tm.name_of(locs[pick[i]]);
      }
      Term inst = evars.empty() ? body : tm.substitute(body, m);
      Term g = detail::ground_tracked(tm, inst, locs);
      adis.push_back(tm.mk_and(sc(g), dist_next));
      log.push_back(lab.str());
      size_t d = 0;
      for (; d < pick.size(); d++) {
        if (++pick[d] < locs.size()) break;
        pick[d] = 0;
      }
      if (d == pick.size()) break;
    }
  }

  // stutter: prophecy locations and every scalar stay, the environment moves
  std::vector<Term> still;
  for (const sys::StateVar& v : s.vars) {
    if (tm.sort(tm.sort_of(v.sym)).kind != SortKind::Array) {
      still.push_back(tm.mk_eq(sc.primed.at(v.sym), v.sym));
      continue;
    }
    for (Term p : prophecies) {
      Term c = sc.cell.at({v.sym, p});
      still.push_back(tm.mk_eq(sc.primed.at(c), c));
    }
  }
  adis.push_back(tm.mk_and(tm.mk_and(still), dist_next));
  log.push_back("stutter");

  Term init_g = detail::ground_tracked(tm, s.init, prophecies);
  AbsSystem out;
  out.qf = check::make_qf_system(tm, avars, aprimed, sc(init_g),
                                 tm.mk_or(adis), sc(s.prop));
  out.qf.index_sort = s.index_sort;
  out.qf.enum_sorts = s.enum_sorts;
  out.qf.background = dist;
  out.prophecies = prophecies;
  out.env_vars = envs;
  out.substitution_log = std::move(log);
  return out;
}

struct ParamOutcome {
  bool holds = false;
  std::string reason;     // set when inconclusive
  check::PdrStats stats;  // from the run that decided the outcome
};

// Checks a candidate invariant through the abstraction: safe there means the
// candidate holds on every instance with at least as many indices as tracked
// locations, and the smaller instances are checked directly. Anything else
// is inconclusive; abstract counterexamples are never reported as concrete.
inline ParamOutcome param_candidate_check(const sys::ArraySystem& s,
                                          Term candidate,
                                          const check::SolverFactory& factory,
                                          check::PdrOptions opts = {}) {
  sys::ArraySystem cand = s;
  cand.prop = candidate;
  ShapeVerdict hv = check_hypotheses(cand);
  if (!hv.accepted) return {false, "hypotheses rejected: " + hv.reason, {}};
  Prophecied pr = introduce_prophecies(guard_strengthen(cand));
  AbsSystem abs = build_abstraction(pr.system, pr.prophecies);
  opts.trace = false;
  check::PdrResult r = check::pdr_check(abs.qf, factory, opts);
  if (r.kind == check::PdrResult::Kind::Unsafe)
    return {false, "abstract counterexample (may be spurious)", r.stats};
  if (r.kind == check::PdrResult::Kind::Unknown)
    return {false, "abstract check gave up: " + r.reason, r.stats};
  size_t cutoff = abs.prophecies.size() + abs.env_vars.size();
  for (size_t n = 1; n < cutoff; n++) {
    sys::GroundInstance g = sys::build_ground_instance(cand, static_cast<int>(n));
    sys::PrimedVocab pv = sys::make_primed(*cand.tm, cand);
    check::PdrResult rg = check::pdr_check(check::make_qf_system(g, pv),
                                           factory, opts);
    if (rg.kind == check::PdrResult::Kind::Unsafe)
      return {false, "candidate fails on the instance of size " +
                         std::to_string(n), rg.stats};
    if (rg.kind != check::PdrResult::Kind::Safe)
      return {false, "instance of size " + std::to_string(n) + ": " + rg.reason,
              rg.stats};
  }
  return {true, "", r.stats};
}

// Writes the abstraction back out in the system text format, reparseable by
// parse_system; the header comments record the tracked variables and the
// origin of every transition disjunct.
inline std::string export_abstraction_text(const AbsSystem& a) {
  const check::QfSystem& qf = a.qf;
  TermManager& tm = *qf.tm;
  std::ostringstream os;
  os << "; parameter abstraction\n";
  os << "; prophecies:";
  for (Term p : a.prophecies) os << " " << tm.name_of(p);
  os << "\n; environment:";
  for (Term e : a.env_vars) os << " " << tm.name_of(e);
  os << "\n";
  for (const std::string& l : a.substitution_log) os << "; " << l << "\n";
  if (qf.index_sort != 0)
    os << "(declare-index-sort " << tm.sort(qf.index_sort).name << ")\n";
  for (SortId es : qf.enum_sorts) {
    os << "(declare-enum-sort " << tm.sort(es).name << " (";
    for (size_t i = 0; i < tm.sort(es).ctors.size(); i++)
      os << (i ? " " : "") << tm.sort(es).ctors[i];
    os << "))\n";
  }
  TermSet props(a.prophecies.begin(), a.prophecies.end());
  for (Term v : qf.vars)
    os << (props.count(v) ? "(declare-frozen " : "(declare-var ")
       << tm.name_of(v) << " " << tm.sort_name(tm.sort_of(v)) << ")\n";
  TermMap to_next;
  for (size_t i = 0; i < qf.vars.size(); i++)
    to_next.emplace(qf.primed[i], tm.mk_next(qf.vars[i]));
  Term init = tm.mk_and(qf.background, qf.init);
  os << "(init " << print_term(tm, init, PrintStyle::System) << ")\n";
  Term trans = tm.substitute(qf.trans, to_next);
  if (tm.op(trans) == Op::Or)
    for (Term d : tm.children(trans))
      os << "(trans " << print_term(tm, d, PrintStyle::System) << ")\n";
  else
    os << "(trans " << print_term(tm, trans, PrintStyle::System) << ")\n";
  os << "(prop " << print_term(tm, qf.prop, PrintStyle::System) << ")\n";
  return os.str();
}

}  // namespace qivc::engine
