#pragma once

// CDCL SAT solver: two-watched literals, first-UIP learning, VSIDS with an
// indexed heap, phase saving, Luby restarts, incremental solving under
// assumptions with final-conflict extraction. Clauses are kept forever; the
// ground problems this backs are small enough that deletion never pays off.

#include <cstdint>
#include <vector>

#include "qivc/util/error.hpp"

namespace qivc::fm {

using Lit = int32_t;  // 2*var + sign, sign 1 = negated
inline Lit mk_lit(int var, bool neg = false) { return 2 * var + (neg ? 1 : 0); }
inline int lit_var(Lit l) { return l >> 1; }
inline bool lit_sign(Lit l) { return l & 1; }
inline Lit lit_neg(Lit l) { return l ^ 1; }

enum class LBool : uint8_t { True, False, Undef };
inline LBool lbool_of(bool b) { return b ? LBool::True : LBool::False; }
inline LBool lbool_neg(LBool b) {
  if (b == LBool::Undef) return b;
  return b == LBool::True ? LBool::False : LBool::True;
}

class SatSolver {
 public:
  int new_var() {
    int v = static_cast<int>(assigns_.size());
    assigns_.push_back(LBool::Undef);
    level_.push_back(0);
    reason_.push_back(-1);
    activity_.push_back(0.0);
    phase_.push_back(false);
    seen_.push_back(0);
    heap_pos_.push_back(-1);
    watches_.emplace_back();
    watches_.emplace_back();
    heap_insert(v);
    return v;
  }

  int num_vars() const { return static_cast<int>(assigns_.size()); }

  // Returns false if the clause is immediately contradictory at level 0.
  bool add_clause(std::vector<Lit> c) {
    if (ok_ == false) return false;
    backtrack(0);
    // remove duplicates and satisfied/false literals at level 0
    std::vector<Lit> out;
    for (Lit l : c) {
      LBool v = value(l);
      if (v == LBool::True) return true;
      if (v == LBool::False) continue;
      bool dup = false, taut = false;
      for (Lit m : out) {
        if (m == l) dup = true;
        if (m == lit_neg(l)) taut = true;
      }
      if (taut) return true;
      if (!dup) out.push_back(l);
    }
    if (out.empty()) {
      ok_ = false;
      return false;
    }
    if (out.size() == 1) {
      enqueue(out[0], -1);
      ok_ = propagate() < 0;
      return ok_;
    }
    attach(std::move(out));
    return true;
  }

  enum class Res { Sat, Unsat };

  Res solve(const std::vector<Lit>& assumptions = {}) {
    conflict_.clear();
    if (!ok_) return Res::Unsat;
    backtrack(0);
    assumptions_ = assumptions;
    int64_t conflicts = 0;
    int luby_idx = 1;
    int64_t restart_limit = luby(luby_idx) * 100;
    for (;;) {
      int confl = propagate();
      if (confl >= 0) {
        conflicts++;
        if (decision_level() == 0) {
          ok_ = false;
          return Res::Unsat;  // conflict_ stays empty: unconditional
        }
        std::vector<Lit> learnt;
        int bt;
        analyze(confl, learnt, bt);
        backtrack(bt);
        if (learnt.size() == 1) {
          enqueue(learnt[0], -1);
        } else {
          int ci = attach(std::move(learnt));
          enqueue(clauses_[ci][0], ci);
        }
        decay_activities();
        if (conflicts >= restart_limit) {
          conflicts = 0;
          restart_limit = luby(++luby_idx) * 100;
          backtrack(0);
        }
        continue;
      }
      // choose the next decision: assumptions first
      if (decision_level() < static_cast<int>(assumptions_.size())) {
        Lit a = assumptions_[decision_level()];
        LBool v = value(a);
        if (v == LBool::True) {
          new_level();
          trail_lim_.back() = static_cast<int>(trail_.size());
          continue;
        }
        if (v == LBool::False) {
          analyze_final(a);
          return Res::Unsat;
        }
        new_level();
        enqueue(a, -1);
        continue;
      }
      int v = pick_branch();
      if (v < 0) return Res::Sat;
      new_level();
      enqueue(mk_lit(v, !phase_[v]), -1);
    }
  }

  bool model_value(int var) const { return assigns_[var] == LBool::True; }
  LBool value_of(int var) const { return assigns_[var]; }

  // After Res::Unsat under assumptions: the subset of assumption literals
  // that participate in the refutation. Empty means unsat without them.
  const std::vector<Lit>& conflict() const { return conflict_; }

  void bump(int var) { bump_activity(var); }

 private:
  bool ok_ = true;
  std::vector<LBool> assigns_;
  std::vector<int> level_;
  std::vector<int> reason_;  // clause index, -1 for decisions/units
  std::vector<std::vector<Lit>> clauses_;
  std::vector<std::vector<int>> watches_;  // per literal: clause indices
  std::vector<Lit> trail_;
  std::vector<int> trail_lim_;
  size_t qhead_ = 0;
  std::vector<double> activity_;
  double var_inc_ = 1.0;
  std::vector<bool> phase_;
  std::vector<char> seen_;
  std::vector<Lit> assumptions_;
  std::vector<Lit> conflict_;

  // activity-ordered heap
  std::vector<int> heap_;
  std::vector<int> heap_pos_;

  LBool value(Lit l) const {
    LBool v = assigns_[lit_var(l)];
    return lit_sign(l) ? lbool_neg(v) : v;
  }

  int decision_level() const { return static_cast<int>(trail_lim_.size()); }
  void new_level() { trail_lim_.push_back(static_cast<int>(trail_.size())); }

  static int64_t luby(int i) {
    // sequence 1,1,2,1,1,2,4,... for i = 1,2,3,...
    int64_t x = i - 1, size = 1, seq = 0;
    while (size < x + 1) {
      seq++;
      size = 2 * size + 1;
    }
    while (size - 1 != x) {
      size = (size - 1) >> 1;
      seq--;
      x = x % size;
    }
    return 1LL << seq;
  }

  void enqueue(Lit l, int reason) {
    assigns_[lit_var(l)] = lit_sign(l) ? LBool::False : LBool::True;
    level_[lit_var(l)] = decision_level();
    reason_[lit_var(l)] = reason;
    trail_.push_back(l);
  }

  int attach(std::vector<Lit> c) {
    int ci = static_cast<int>(clauses_.size());
    watches_[lit_neg(c[0])].push_back(ci);
    watches_[lit_neg(c[1])].push_back(ci);
    clauses_.push_back(std::move(c));
    return ci;
  }

  // returns conflicting clause index or -1
  int propagate() {
    while (qhead_ < trail_.size()) {
      Lit p = trail_[qhead_++];
      std::vector<int>& ws = watches_[p];
      size_t keep = 0;
      for (size_t wi = 0; wi < ws.size(); wi++) {
        int ci = ws[wi];
        std::vector<Lit>& c = clauses_[ci];
        // ensure the falsified literal is c[1]
        Lit fl = lit_neg(p);
        if (c[0] == fl) std::swap(c[0], c[1]);
        if (value(c[0]) == LBool::True) {
          ws[keep++] = ci;
          continue;
        }
        bool moved = false;
        for (size_t k = 2; k < c.size(); k++) {
          if (value(c[k]) != LBool::False) {
            std::swap(c[1], c[k]);
            watches_[lit_neg(c[1])].push_back(ci);
            moved = true;
            break;
          }
        }
        if (moved) continue;
        ws[keep++] = ci;
        if (value(c[0]) == LBool::False) {
          // conflict: restore remaining watches
          for (size_t k = wi + 1; k < ws.size(); k++) ws[keep++] = ws[k];
          ws.resize(keep);
          qhead_ = trail_.size();
          return ci;
        }
        enqueue(c[0], ci);
      }
      ws.resize(keep);
    }
    return -1;
  }

  void analyze(int confl, std::vector<Lit>& learnt, int& bt_level) {
    learnt.push_back(0);  // slot for the asserting literal
    int counter = 0;
    Lit p = -1;
    size_t idx = trail_.size();
    int ci = confl;
    std::vector<int> to_clear;
    do {
      std::vector<Lit>& c = clauses_[ci];
      for (size_t k = (p == -1 ? 0 : 1); k < c.size(); k++) {
        Lit q = c[k];
        int v = lit_var(q);
        if (!seen_[v] && level_[v] > 0) {
          seen_[v] = 1;
          to_clear.push_back(v);
          bump_activity(v);
          if (level_[v] >= decision_level())
            counter++;
          else
            learnt.push_back(q);
        }
      }
      // next literal to resolve on
      while (!seen_[lit_var(trail_[--idx])]) {
      }
      p = trail_[idx];
      seen_[lit_var(p)] = 0;
      counter--;
      ci = reason_[lit_var(p)];
    } while (counter > 0);
    learnt[0] = lit_neg(p);

    // conflict-clause minimization: drop literals implied by the rest
    size_t out = 1;
    for (size_t k = 1; k < learnt.size(); k++) {
      int r = reason_[lit_var(learnt[k])];
      bool redundant = false;
      if (r >= 0) {
        redundant = true;
        for (size_t j = 1; j < clauses_[r].size(); j++) {
          int v = lit_var(clauses_[r][j]);
          if (!seen_[v] && level_[v] > 0) {
            redundant = false;
            break;
          }
        }
      }
      if (!redundant) learnt[out++] = learnt[k];
    }
    learnt.resize(out);

    bt_level = 0;
    if (learnt.size() > 1) {
      size_t max_i = 1;
      for (size_t k = 2; k < learnt.size(); k++)
        if (level_[lit_var(learnt[k])] > level_[lit_var(learnt[max_i])]) max_i = k;
      std::swap(learnt[1], learnt[max_i]);
      bt_level = level_[lit_var(learnt[1])];
    }
    for (int v : to_clear) seen_[v] = 0;
  }

  // Failed assumption `a` (value false). Collect the assumptions that force it.
  void analyze_final(Lit a) {
    conflict_.clear();
    conflict_.push_back(a);
    if (decision_level() == 0) return;
    seen_[lit_var(a)] = 1;
    for (size_t i = trail_.size(); i-- > 0;) {
      int v = lit_var(trail_[i]);
      if (!seen_[v]) continue;
      seen_[v] = 0;
      if (reason_[v] < 0) {
        if (level_[v] > 0) conflict_.push_back(trail_[i]);
      } else {
        for (size_t k = 1; k < clauses_[reason_[v]].size(); k++) {
          int u = lit_var(clauses_[reason_[v]][k]);
          if (level_[u] > 0) seen_[u] = 1;
        }
      }
      if (static_cast<int>(i) < (trail_lim_.empty() ? 0 : trail_lim_[0])) break;
    }
    seen_[lit_var(a)] = 0;
  }

  void backtrack(int lvl) {
    if (decision_level() <= lvl) return;
    for (size_t i = trail_.size(); i-- > static_cast<size_t>(trail_lim_[lvl]);) {
      int v = lit_var(trail_[i]);
      phase_[v] = assigns_[v] == LBool::True;
      assigns_[v] = LBool::Undef;
      reason_[v] = -1;
      heap_insert(v);
    }
    trail_.resize(trail_lim_[lvl]);
    trail_lim_.resize(lvl);
    qhead_ = trail_.size();
  }

  int pick_branch() {
    while (!heap_.empty()) {
      int v = heap_[0];
      heap_remove_top();
      if (assigns_[v] == LBool::Undef) return v;
    }
    return -1;
  }

  void bump_activity(int v) {
    activity_[v] += var_inc_;
    if (activity_[v] > 1e100) {
      for (double& a : activity_) a *= 1e-100;
      var_inc_ *= 1e-100;
    }
    if (heap_pos_[v] >= 0) heap_up(heap_pos_[v]);
  }

  void decay_activities() { var_inc_ /= 0.95; }

  // ---- indexed max-heap on activity ----

  bool heap_less(int a, int b) const { return activity_[a] > activity_[b]; }

  void heap_insert(int v) {
    if (heap_pos_[v] >= 0) return;
    heap_pos_[v] = static_cast<int>(heap_.size());
    heap_.push_back(v);
    heap_up(heap_pos_[v]);
  }

  void heap_up(int i) {
    int v = heap_[i];
    while (i > 0) {
      int p = (i - 1) / 2;
      if (!heap_less(v, heap_[p])) break;
      heap_[i] = heap_[p];
      heap_pos_[heap_[i]] = i;
      i = p;
    }
    heap_[i] = v;
    heap_pos_[v] = i;
  }

  void heap_down(int i) {
    int v = heap_[i];
    int n = static_cast<int>(heap_.size());
    for (;;) {
      int c = 2 * i + 1;
      if (c >= n) break;
      if (c + 1 < n && heap_less(heap_[c + 1], heap_[c])) c++;
      if (!heap_less(heap_[c], v)) break;
      heap_[i] = heap_[c];
      heap_pos_[heap_[i]] = i;
      i = c;
    }
    heap_[i] = v;
    heap_pos_[v] = i;
  }

  void heap_remove_top() {
    int v = heap_[0];
    heap_pos_[v] = -1;
    int last = heap_.back();
    heap_.pop_back();
    if (!heap_.empty() && last != v) {
      heap_[0] = last;
      heap_pos_[last] = 0;
      heap_down(0);
    }
  }
};

}  // namespace qivc::fm
