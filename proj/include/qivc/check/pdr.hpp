#pragma once

// Quantifier-free IC3/PDR over a solver backend. Cubes are valuations of a
// growing pool of predicate atoms rather than concrete assignments, which
// keeps them finite over infinite element theories; when an abstract
// counterexample chain does not concretize, the unsatisfiable unrolling is
// interpolated and the interpolant atoms refine the pool. Verdicts are
// validated before being returned: safe carries an invariant re-checked by
// the three induction queries on a fresh session, unsafe carries a trace
// replayed step by step.

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qivc/logic/ops.hpp"
#include "qivc/smt/solver.hpp"
#include "qivc/system/ground.hpp"

namespace qivc::check {

using smt::Verdict;
using SolverFactory = std::function<std::unique_ptr<smt::Solver>()>;

inline SolverFactory bundled_factory(TermManager& tm) {
  return [&tm] { return std::make_unique<smt::BundledSolver>(tm); };
}

inline SolverFactory process_factory(TermManager& tm, const std::string& cmd,
                                     int timeout_ms = 0) {
  return [&tm, cmd, timeout_ms] {
    return std::make_unique<smt::ProcessSolver>(tm, cmd, timeout_ms);
  };
}

// ---- quantifier-free transition system ----

// A two-vocabulary ground system: `primed[i]` is the next-state copy of
// `vars[i]`, `rigid` are shared constants without a primed copy, and
// `background` (typically their distinctness) joins every query.
struct QfSystem {
  TermManager* tm = nullptr;
  SortId index_sort = 0;
  std::vector<SortId> enum_sorts;
  std::vector<Term> rigid;
  std::vector<Term> vars, primed;
  Term init, trans, prop, background;
  TermMap prime_map, unprime_map;

  Term prime(Term f) const { return tm->substitute(f, prime_map); }
  Term unprime(Term f) const { return tm->substitute(f, unprime_map); }

  void declare(smt::Solver& sol) const {
    if (index_sort != 0) sol.declare_index_sort(tm->sort(index_sort).name);
    for (SortId es : enum_sorts) sol.declare_enum_sort(es);
    for (Term c : rigid) sol.register_const(c);
    for (Term c : vars) sol.register_const(c);
    for (Term c : primed) sol.register_const(c);
  }

  std::vector<Term> index_consts() const {
    std::vector<Term> out;
    for (Term c : rigid)
      if (tm->sort(tm->sort_of(c)).kind == SortKind::Index) out.push_back(c);
    return out;
  }

  // Ground terms whose values determine a full state: scalar variables, and
  // one cell per array variable and index constant.
  std::vector<Term> observations() const {
    std::vector<Term> out;
    std::vector<Term> ics = index_consts();
    for (Term v : vars) {
      if (tm->sort(tm->sort_of(v)).kind != SortKind::Array) {
        out.push_back(v);
        continue;
      }
      if (ics.empty())
        fail_internal("cannot observe array state without index constants");
      for (Term c : ics) out.push_back(tm->mk_select(v, c));
    }
    return out;
  }
};

namespace detail {

inline void finish_qf(QfSystem& s) {
  if (s.vars.size() != s.primed.size())
    fail_internal("current and next state variable lists differ in length");
  for (size_t i = 0; i < s.vars.size(); i++) {
    s.prime_map.emplace(s.vars[i], s.primed[i]);
    s.unprime_map.emplace(s.primed[i], s.vars[i]);
  }
  for (Term f : {s.init, s.trans, s.prop, s.background})
    if (contains_quantifier(*s.tm, f) || contains_next(*s.tm, f))
      fail_input("ground checking needs quantifier-free two-vocabulary formulas");
}

}  // namespace detail

inline QfSystem make_qf_system(const sys::GroundInstance& g,
                               const sys::PrimedVocab& pv) {
  const sys::ArraySystem& a = *g.parent;
  QfSystem s;
  s.tm = a.tm;
  s.index_sort = a.index_sort;
  s.enum_sorts = a.enum_sorts;
  s.rigid = g.consts;
  for (const sys::StateVar& v : a.vars) s.vars.push_back(v.sym);
  s.primed = pv.primed;
  s.init = g.init_g;
  s.trans = sys::strip_next(*a.tm, g.trans_g_or, pv);
  s.prop = g.prop_g;
  s.background = g.all_diff;
  detail::finish_qf(s);
  return s;
}

inline QfSystem make_qf_system(TermManager& tm, std::vector<Term> vars,
                               std::vector<Term> primed, Term init, Term trans,
                               Term prop) {
  QfSystem s;
  s.tm = &tm;
  s.vars = std::move(vars);
  s.primed = std::move(primed);
  s.init = init;
  s.trans = trans;
  s.prop = prop;
  s.background = tm.mk_true();
  detail::finish_qf(s);
  return s;
}

// ---- counterexample traces ----

// Full assignments s_0..s_k as (observation, value literal) pairs, in the
// order of QfSystem::observations().
struct CexTrace {
  std::vector<std::vector<std::pair<Term, Term>>> states;
  size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
};

inline Term state_formula(TermManager& tm,
                          const std::vector<std::pair<Term, Term>>& st) {
  std::vector<Term> eqs;
  for (const auto& [obs, val] : st) eqs.push_back(tm.mk_eq(obs, val));
  return tm.mk_and(eqs);
}

// Re-checks the three trace conditions on the given (fresh) solver: the
// first state satisfies init, every adjacent pair satisfies trans, and the
// last state violates the property. Throws naming the failing step.
inline void replay_trace(smt::Solver& sol, const CexTrace& trace,
                         const QfSystem& sys) {
  TermManager& tm = *sys.tm;
  if (trace.states.empty()) fail_input("trace replay: empty trace");
  std::vector<Term> obs = sys.observations();
  for (size_t i = 0; i < trace.states.size(); i++) {
    const auto& st = trace.states[i];
    if (st.size() != obs.size())
      fail_input("trace replay: state " + std::to_string(i) +
                 " is not a full assignment");
    for (size_t j = 0; j < obs.size(); j++)
      if (st[j].first != obs[j])
        fail_input("trace replay: state " + std::to_string(i) +
                   " assigns the wrong observations");
  }
  sys.declare(sol);
  auto holds = [&](Term pinned, Term f, const std::string& what) {
    sol.push();
    sol.assert_term(sys.background);
    sol.assert_term(pinned);
    Verdict consistent = sol.check_sat();
    if (consistent != Verdict::Sat)
      fail_input("trace replay: " + what + ": assignment is inconsistent");
    sol.assert_term(tm.mk_not(f));
    Verdict v = sol.check_sat();
    sol.pop();
    if (v != Verdict::Unsat) fail_input("trace replay: " + what);
  };
  holds(state_formula(tm, trace.states[0]), sys.init,
        "state 0 does not satisfy the initial formula");
  for (size_t i = 0; i + 1 < trace.states.size(); i++) {
    Term pair = tm.mk_and(state_formula(tm, trace.states[i]),
                          sys.prime(state_formula(tm, trace.states[i + 1])));
    holds(pair, sys.trans,
          "step " + std::to_string(i) + " is not a transition");
  }
  holds(state_formula(tm, trace.states.back()), tm.mk_not(sys.prop),
        "final state does not violate the property");
}

// ---- inductive invariants ----

struct InductiveInvariant {
  std::vector<Term> clauses;
  Term formula(TermManager& tm) const { return tm.mk_and(clauses); }
};

// The three induction checks over an already-declared solver.
inline bool invariant_holds(smt::Solver& sol, const QfSystem& sys,
                            const std::vector<Term>& clauses) {
  TermManager& tm = *sys.tm;
  Term inv = tm.mk_and(clauses);
  auto entails = [&](const std::vector<Term>& given, Term goal) {
    sol.push();
    sol.assert_term(sys.background);
    for (Term f : given) sol.assert_term(f);
    sol.assert_term(tm.mk_not(goal));
    Verdict v = sol.check_sat();
    sol.pop();
    return v == Verdict::Unsat;
  };
  return entails({sys.init}, inv) &&
         entails({inv, sys.trans}, sys.prime(inv)) &&
         entails({inv}, sys.prop);
}

inline InductiveInvariant make_invariant(smt::Solver& sol, const QfSystem& sys,
                                         std::vector<Term> clauses) {
  if (!invariant_holds(sol, sys, clauses))
    fail_internal("constructed invariant fails the induction checks");
  return InductiveInvariant{std::move(clauses)};
}

// ---- the checker ----

struct PdrOptions {
  int max_frames = 200;
  int max_refinements = 50;
  int core_rounds = 3;       // cube re-minimization rounds per blocked cube
  long max_queries = 400000; // overall solver-call budget
  bool check_frames = false; // solver-check the frame conditions every round
  bool trace = true;         // extract and replay counterexample traces; off,
                             // Unsafe results carry an empty trace (needed when
                             // index-valued state has no rigid constant anchors)
  SolverFactory itp;         // interpolation backend; main factory when unset
};

struct PdrStats {
  int frames = 0;
  int clauses = 0;
  int refinements = 0;
  long queries = 0;
  std::string summary() const {
    return "frames=" + std::to_string(frames) +
           " clauses=" + std::to_string(clauses) +
           " queries=" + std::to_string(queries) +
           " refinements=" + std::to_string(refinements);
  }
};

struct PdrResult {
  enum class Kind { Safe, Unsafe, Unknown } kind = Kind::Unknown;
  InductiveInvariant invariant;             // Safe
  CexTrace trace;                           // Unsafe
  std::string reason;                       // Unknown
  PdrStats stats;
  std::vector<std::vector<Term>> frame_clauses;  // clause levels at exit
};

namespace detail {

class PdrEngine {
 public:
  PdrEngine(const QfSystem& sys, SolverFactory factory, PdrOptions opts)
      : sys_(sys), tm_(*sys.tm), factory_(std::move(factory)),
        opts_(std::move(opts)) {
    if (!opts_.itp) opts_.itp = factory_;
  }

  PdrResult run() {
    solver_ = factory_();
    sys_.declare(*solver_);
    solver_->assert_term(sys_.background);
    seed_atoms();

    if (query({sys_.init}) == Verdict::Unsat)  // no initial states at all
      return safe({tm_.mk_false()});
    solver_->push();
    solver_->assert_term(sys_.init);
    solver_->assert_term(tm_.mk_not(sys_.prop));
    stats_.queries++;
    if (solver_->check_sat() == Verdict::Sat) {
      CexTrace t = opts_.trace ? extract_trace(0) : CexTrace{};
      solver_->pop();
      return unsafe(std::move(t));
    }
    solver_->pop();

    delta_.assign(2, {});  // levels 0 (unused; F_0 is init) and 1
    int k = 1;
    for (;;) {
      stats_.frames = k;
      // block every property violation reachable inside F_k
      for (;;) {
        if (over_budget()) return unknown("query budget exhausted");
        solver_->push();
        assert_frame(k);
        solver_->assert_term(tm_.mk_not(sys_.prop));
        stats_.queries++;
        Verdict v = solver_->check_sat();
        if (v == Verdict::Unsat) {
          solver_->pop();
          break;
        }
        std::vector<Term> bad = atom_cube();
        solver_->pop();
        Step s = recblock(bad, k);
        if (s == Step::Trace) return unsafe(std::move(found_trace_));
        if (s == Step::Stuck) return unknown(stuck_reason_);
        // Step::Blocked and Step::Refined both re-enter the violation scan
      }

      if (k >= opts_.max_frames)
        return unknown("frame budget of " + std::to_string(opts_.max_frames) +
                       " exhausted");
      delta_.emplace_back();
      k++;

      // push clauses forward while they stay inductive relative to their frame
      for (int i = 1; i < k; i++) {
        std::vector<Term> keep;
        for (Term cl : delta_[i]) {
          if (over_budget()) return unknown("query budget exhausted");
          solver_->push();
          assert_frame(i);
          solver_->assert_term(sys_.trans);
          solver_->assert_term(tm_.mk_not(sys_.prime(cl)));
          stats_.queries++;
          Verdict v = solver_->check_sat();
          solver_->pop();
          if (v == Verdict::Unsat)
            delta_[i + 1].push_back(cl);
          else
            keep.push_back(cl);
        }
        delta_[i] = std::move(keep);
      }

      if (opts_.check_frames) check_frame_conditions(k);

      for (int i = 1; i < k; i++)
        if (delta_[i].empty()) {
          std::vector<Term> clauses;
          TermSet seen;
          for (int j = i; j < static_cast<int>(delta_.size()); j++)
            for (Term cl : delta_[j])
              if (seen.insert(cl).second) clauses.push_back(cl);
          for (const auto& lits : to_cnf(tm_, sys_.prop)) {
            Term cl = clause_to_term(tm_, lits);
            if (seen.insert(cl).second) clauses.push_back(cl);
          }
          return safe(std::move(clauses));
        }
    }
  }

 private:
  enum class Step { Blocked, Trace, Refined, Stuck };

  const QfSystem& sys_;
  TermManager& tm_;
  SolverFactory factory_;
  PdrOptions opts_;
  std::unique_ptr<smt::Solver> solver_;
  std::vector<Term> atoms_;
  TermSet atom_set_;
  std::vector<std::vector<Term>> delta_;
  std::vector<TermMap> step_map_;  // vocabulary copies for unrollings
  PdrStats stats_;
  CexTrace found_trace_;
  std::string stuck_reason_;

  bool over_budget() const { return stats_.queries >= opts_.max_queries; }

  // ---- atom pool ----

  void add_atom(Term a) {
    TermSet cs = constants_in(tm_, a);
    bool touches_state = false;
    for (Term v : sys_.vars) touches_state |= cs.count(v) > 0;
    if (!touches_state) return;
    if (atom_set_.insert(a).second) atoms_.push_back(a);
  }

  void seed_atoms() {
    for (Term f : {sys_.init, sys_.trans, sys_.prop})
      for (Term a : atoms_of(tm_, f)) add_atom(sys_.unprime(a));
  }

  // Cube of the current model: one literal per pool atom. Every formula
  // whose atoms live in the pool has one truth value across the cube, so
  // init and the property are decided by construction.
  std::vector<Term> atom_cube() {
    std::vector<Value> vals = solver_->get_values(atoms_);
    std::vector<Term> cube;
    cube.reserve(atoms_.size());
    for (size_t i = 0; i < atoms_.size(); i++) {
      if (vals[i].kind != Value::Kind::Bool)
        fail_internal("atom evaluated to a non-boolean value");
      cube.push_back(vals[i].b ? atoms_[i] : tm_.mk_not(atoms_[i]));
    }
    return cube;
  }

  // ---- frames ----

  // F_i as the union of clause levels >= i; F_0 is the initial formula.
  void assert_frame(int i) {
    if (i == 0) {
      solver_->assert_term(sys_.init);
      return;
    }
    for (size_t j = i; j < delta_.size(); j++)
      for (Term cl : delta_[j]) solver_->assert_term(cl);
  }

  Verdict query(const std::vector<Term>& fs) {
    solver_->push();
    for (Term f : fs) solver_->assert_term(f);
    stats_.queries++;
    Verdict v = solver_->check_sat();
    solver_->pop();
    return v;
  }

  // ---- blocking ----

  struct Entry {
    std::vector<Term> cube;
    int parent;
  };

  Step recblock(const std::vector<Term>& bad, int k) {
    std::vector<Entry> chain;
    chain.push_back({bad, -1});
    using Obl = std::pair<int, int>;  // frame, chain entry
    std::priority_queue<Obl, std::vector<Obl>, std::greater<Obl>> pq;
    pq.push({k, 0});
    while (!pq.empty()) {
      auto [i, e] = pq.top();
      if (over_budget()) {
        stuck_reason_ = "query budget exhausted";
        return Step::Stuck;
      }
      // a cube holding in an initial state heads a counterexample candidate;
      // blocking it would carve initial states out of the frames
      if (i == 0 ||
          query({sys_.init, tm_.mk_and(chain[e].cube)}) == Verdict::Sat)
        return concretize(chain, e);
      const std::vector<Term>& cube = chain[e].cube;
      solver_->push();
      assert_frame(i - 1);
      solver_->assert_term(tm_.mk_not(tm_.mk_and(cube)));
      solver_->assert_term(sys_.trans);
      for (size_t l = 0; l < cube.size(); l++)
        solver_->assert_term(sys_.prime(cube[l]), "l" + std::to_string(l));
      stats_.queries++;
      Verdict v = solver_->check_sat();
      if (v == Verdict::Sat) {
        std::vector<Term> pred = atom_cube();
        solver_->pop();
        chain.push_back({std::move(pred), e});
        pq.push({i - 1, static_cast<int>(chain.size()) - 1});
        continue;
      }
      std::vector<Term> kept = core_subset(cube, solver_->unsat_core());
      solver_->pop();
      Term clause = tm_.mk_not(tm_.mk_and(generalize(cube, std::move(kept), i)));
      delta_[i].push_back(clause);
      stats_.clauses++;
      pq.pop();
    }
    return Step::Blocked;
  }

  static std::vector<Term> core_subset(const std::vector<Term>& cube,
                                       const std::vector<std::string>& core) {
    std::set<std::string> names(core.begin(), core.end());
    std::vector<Term> out;
    for (size_t l = 0; l < cube.size(); l++)
      if (names.count("l" + std::to_string(l))) out.push_back(cube[l]);
    return out;
  }

  // Literals of `cube` sufficient to keep the blocking query unsatisfiable
  // while still excluding the initial states, shrunk by unsat cores for a
  // bounded number of rounds. Soundness never depends on minimality: the
  // result is always a subset of `cube` re-established by the final query.
  std::vector<Term> generalize(const std::vector<Term>& cube,
                               std::vector<Term> cand, int frame) {
    auto excludes_init = [&](const std::vector<Term>& lits) {
      return query({sys_.init, tm_.mk_and(lits)}) == Verdict::Unsat;
    };
    auto init_core = [&]() {
      solver_->push();
      solver_->assert_term(sys_.init);
      for (size_t l = 0; l < cube.size(); l++)
        solver_->assert_term(cube[l], "l" + std::to_string(l));
      stats_.queries++;
      Verdict v = solver_->check_sat();
      std::vector<Term> out = v == Verdict::Unsat
                                  ? core_subset(cube, solver_->unsat_core())
                                  : cube;
      solver_->pop();
      return out;
    };
    auto patch = [&](std::vector<Term> lits) {
      if (excludes_init(lits)) return lits;
      TermSet have(lits.begin(), lits.end());
      for (Term l : init_core())
        if (have.insert(l).second) lits.push_back(l);
      return lits;
    };

    cand = patch(std::move(cand));
    for (int round = 1; round < opts_.core_rounds; round++) {
      if (over_budget()) break;
      solver_->push();
      assert_frame(frame - 1);
      solver_->assert_term(tm_.mk_not(tm_.mk_and(cand)));
      solver_->assert_term(sys_.trans);
      for (size_t l = 0; l < cand.size(); l++)
        solver_->assert_term(sys_.prime(cand[l]), "l" + std::to_string(l));
      stats_.queries++;
      Verdict v = solver_->check_sat();
      if (v != Verdict::Unsat) {  // weakened left side lost the proof; stop
        solver_->pop();
        break;
      }
      std::vector<Term> smaller = core_subset(cand, solver_->unsat_core());
      solver_->pop();
      smaller = patch(std::move(smaller));
      if (smaller.size() >= cand.size()) break;
      cand = std::move(smaller);
    }
    return cand;
  }

  // ---- concretization and refinement ----

  void ensure_steps(int upto) {
    if (step_map_.empty()) step_map_.emplace_back();  // step 0: identity
    while (static_cast<int>(step_map_.size()) <= upto) {
      int s = static_cast<int>(step_map_.size());
      TermMap m;
      for (Term v : sys_.vars) {
        Term c = tm_.mk_const(tm_.name_of(v) + "@" + std::to_string(s),
                              tm_.sort_of(v));
        m.emplace(v, c);
        solver_->register_const(c);
      }
      step_map_.push_back(std::move(m));
    }
  }

  Term at_step(Term f, int s) {
    return s == 0 ? f : tm_.substitute(f, step_map_[s]);
  }

  // trans with current vars at step s-1 and primed vars at step s
  Term trans_step(int s) {
    TermMap m;
    for (size_t i = 0; i < sys_.vars.size(); i++) {
      if (s - 1 > 0) m.emplace(sys_.vars[i], step_map_[s - 1].at(sys_.vars[i]));
      m.emplace(sys_.primed[i], step_map_[s].at(sys_.vars[i]));
    }
    return tm_.substitute(sys_.trans, m);
  }

  std::vector<Term> chain_groups(const std::vector<Entry>& chain, int first) {
    std::vector<std::vector<Term>> cubes;
    for (int e = first; e != -1; e = chain[e].parent)
      cubes.push_back(chain[e].cube);
    int m = static_cast<int>(cubes.size()) - 1;
    ensure_steps(m);
    std::vector<Term> groups;
    groups.push_back(tm_.mk_and(sys_.init, at_step(tm_.mk_and(cubes[0]), 0)));
    for (int s = 1; s <= m; s++)
      groups.push_back(
          tm_.mk_and(trans_step(s), at_step(tm_.mk_and(cubes[s]), s)));
    return groups;
  }

  Step concretize(const std::vector<Entry>& chain, int first) {
    std::vector<Term> groups = chain_groups(chain, first);
    int m = static_cast<int>(groups.size()) - 1;
    solver_->push();
    for (Term g : groups) solver_->assert_term(g);
    stats_.queries++;
    Verdict v = solver_->check_sat();
    if (v == Verdict::Sat) {
      if (opts_.trace) found_trace_ = extract_trace(m);
      solver_->pop();
      return Step::Trace;
    }
    solver_->pop();
    return refine(groups);
  }

  Step refine(const std::vector<Term>& groups) {
    if (stats_.refinements >= opts_.max_refinements) {
      stuck_reason_ = "refinement budget of " +
                      std::to_string(opts_.max_refinements) + " exhausted";
      return Step::Stuck;
    }
    std::unique_ptr<smt::Solver> itp;
    std::vector<Term> seq;
    try {
      itp = opts_.itp();
      sys_.declare(*itp);
      for (const TermMap& m : step_map_)
        for (const auto& [v, c] : m) itp->register_const(c);
      seq = itp->sequence_interpolants(groups);
    } catch (const Error& e) {
      stuck_reason_ = std::string("abstract counterexample is spurious and "
                                  "interpolation failed: ") +
                      e.what();
      return Step::Stuck;
    }
    // interpolant j speaks about step j-1; fold it back to state vocabulary
    size_t before = atoms_.size();
    for (size_t j = 0; j < seq.size(); j++) {
      TermMap back;
      if (j > 0)
        for (Term v : sys_.vars) back.emplace(step_map_[j].at(v), v);
      Term folded = j > 0 ? tm_.substitute(seq[j], back) : seq[j];
      for (Term a : atoms_of(tm_, folded)) add_atom(a);
    }
    if (atoms_.size() == before) {
      stuck_reason_ =
          "abstraction refinement made no progress (" + stats_.summary() + ")";
      return Step::Stuck;
    }
    stats_.refinements++;
    return Step::Refined;
  }

  // ---- traces ----

  // Reads the model currently on the main solver (after a sat unrolling of
  // `m` steps) into a validated trace.
  CexTrace extract_trace(int m) {
    ensure_steps(m);
    std::vector<Term> obs = sys_.observations();
    std::vector<Term> all;
    for (int s = 0; s <= m; s++)
      for (Term o : obs) all.push_back(at_step(o, s));
    std::vector<Term> ics = sys_.index_consts();
    for (Term c : ics) all.push_back(c);
    std::vector<Value> vals = solver_->get_values(all);

    std::map<int, Term> elem_const;
    for (size_t i = 0; i < ics.size(); i++) {
      const Value& v = vals[(m + 1) * obs.size() + i];
      if (v.kind != Value::Kind::Elem)
        fail_internal("index constant evaluated to a non-element value");
      if (!elem_const.emplace(v.e, ics[i]).second)
        fail_internal("two index constants share a universe element");
    }

    CexTrace t;
    for (int s = 0; s <= m; s++) {
      std::vector<std::pair<Term, Term>> st;
      for (size_t i = 0; i < obs.size(); i++)
        st.emplace_back(obs[i], value_term(vals[s * obs.size() + i],
                                           tm_.sort_of(obs[i]), elem_const));
      t.states.push_back(std::move(st));
    }
    std::unique_ptr<smt::Solver> fresh = factory_();
    replay_trace(*fresh, t, sys_);
    return t;
  }

  Term value_term(const Value& v, SortId sort,
                  const std::map<int, Term>& elem_const) {
    switch (v.kind) {
      case Value::Kind::Bool:
        return tm_.mk_bool(v.b);
      case Value::Kind::Num: {
        if (v.q.get_den() != 1 || !v.q.get_num().fits_slong_p())
          fail_capability("model value is not a representable integer");
        return tm_.mk_num(v.q.get_num().get_si(), sort);
      }
      case Value::Kind::Enum:
        return tm_.mk_enum_at(sort, static_cast<size_t>(v.e));
      case Value::Kind::Elem: {
        auto it = elem_const.find(v.e);
        if (it == elem_const.end())
          fail_capability("model maps state outside the instance universe");
        return it->second;
      }
    }
    fail_internal("unreachable value kind");
  }

  // ---- exits ----

  PdrResult safe(std::vector<Term> clauses) {
    std::unique_ptr<smt::Solver> fresh = factory_();
    sys_.declare(*fresh);
    PdrResult r;
    r.kind = PdrResult::Kind::Safe;
    r.invariant = make_invariant(*fresh, sys_, std::move(clauses));
    r.stats = stats_;
    r.frame_clauses = delta_;
    return r;
  }

  PdrResult unsafe(CexTrace t) {
    PdrResult r;
    r.kind = PdrResult::Kind::Unsafe;
    r.trace = std::move(t);
    r.stats = stats_;
    r.frame_clauses = delta_;
    return r;
  }

  PdrResult unknown(std::string why) {
    PdrResult r;
    r.kind = PdrResult::Kind::Unknown;
    r.reason = why + " (" + stats_.summary() + ")";
    r.stats = stats_;
    r.frame_clauses = delta_;
    return r;
  }

  // Solver-checked frame conditions: F_i entails F_{i+1}, one step from F_i
  // stays inside F_{i+1}, and every frame below the frontier satisfies the
  // property. Debug instrumentation, quadratic in the frame count.
  void check_frame_conditions(int k) {
    for (int i = 0; i + 1 <= k; i++) {
      std::vector<Term> next;
      for (size_t j = i + 1; j < delta_.size(); j++)
        for (Term cl : delta_[j]) next.push_back(cl);
      solver_->push();
      assert_frame(i);
      solver_->assert_term(tm_.mk_not(tm_.mk_and(next)));
      stats_.queries++;
      if (solver_->check_sat() != Verdict::Unsat)
        fail_internal("frame " + std::to_string(i) +
                      " does not entail its successor");
      solver_->pop();
      solver_->push();
      assert_frame(i);
      solver_->assert_term(sys_.trans);
      solver_->assert_term(tm_.mk_not(sys_.prime(tm_.mk_and(next))));
      stats_.queries++;
      if (solver_->check_sat() != Verdict::Unsat)
        fail_internal("frame " + std::to_string(i) +
                      " can step outside its successor");
      solver_->pop();
    }
    for (int i = 1; i < k; i++) {
      solver_->push();
      assert_frame(i);
      solver_->assert_term(tm_.mk_not(sys_.prop));
      stats_.queries++;
      if (solver_->check_sat() != Verdict::Unsat)
        fail_internal("frame " + std::to_string(i) +
                      " violates the property below the frontier");
      solver_->pop();
    }
  }
};

}  // namespace detail

inline PdrResult pdr_check(const QfSystem& sys, const SolverFactory& factory,
                           PdrOptions opts = {}) {
  return detail::PdrEngine(sys, factory, std::move(opts)).run();
}

// Deletion-based invariant minimization over permutation orbits of the index
// constants: the invariant is first closed under the permutations (validity
// is preserved for symmetric systems), then whole orbits are dropped as long
// as the three induction checks still pass, so two symmetric clauses are
// always kept or dropped together.
inline InductiveInvariant minimize_invariant(const InductiveInvariant& inv,
                                             const QfSystem& sys,
                                             const std::vector<Term>& consts,
                                             const SolverFactory& factory) {
  TermManager& tm = *sys.tm;
  std::unique_ptr<smt::Solver> sol = factory();
  sys.declare(*sol);

  std::vector<std::vector<Term>> orbits;
  TermSet seen;
  for (Term cl : inv.clauses) {
    if (seen.count(cl)) continue;
    std::vector<Term> orbit = sys::symmetric_closure(tm, cl, consts);
    for (Term o : orbit) seen.insert(o);
    orbits.push_back(std::move(orbit));
  }
  std::vector<Term> closed;
  for (const auto& orbit : orbits)
    closed.insert(closed.end(), orbit.begin(), orbit.end());
  if (!invariant_holds(*sol, sys, closed))
    fail_internal("symmetric closure broke the invariant");

  std::vector<bool> dropped(orbits.size(), false);
  auto remaining = [&]() {
    std::vector<Term> out;
    for (size_t i = 0; i < orbits.size(); i++)
      if (!dropped[i])
        out.insert(out.end(), orbits[i].begin(), orbits[i].end());
    return out;
  };
  for (int pass = 0; pass < 8; pass++) {
    bool changed = false;
    for (size_t i = 0; i < orbits.size(); i++) {
      if (dropped[i]) continue;
      dropped[i] = true;
      if (invariant_holds(*sol, sys, remaining()))
        changed = true;
      else
        dropped[i] = false;
    }
    if (!changed) break;
  }
  return make_invariant(*sol, sys, remaining());
}

}  // namespace qivc::check
