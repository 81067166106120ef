#pragma once

// Linear arithmetic over Int and Real: a from-scratch simplex in the style of
// Dutertre and de Moura (bound asserting, Bland's rule, delta-rationals for
// strict inequalities) with branch-and-bound for integer variables. Integer
// bounds are tightened at assertion time, which settles most divisibility
// conflicts before branching; a node budget turns the remaining pathological
// instances into a resource error rather than a hang.

#include <gmpxx.h>

#include <map>
#include <optional>
#include <vector>

#include "qivc/util/error.hpp"

namespace qivc::fm {

// a + d*epsilon for an infinitesimal epsilon > 0
struct DeltaQ {
  mpq_class a = 0;
  mpq_class d = 0;

  bool operator<(const DeltaQ& o) const { return a < o.a || (a == o.a && d < o.d); }
  bool operator<=(const DeltaQ& o) const { return a < o.a || (a == o.a && d <= o.d); }
  bool operator==(const DeltaQ& o) const { return a == o.a && d == o.d; }
  DeltaQ operator+(const DeltaQ& o) const { return {a + o.a, d + o.d}; }
  DeltaQ operator-(const DeltaQ& o) const { return {a - o.a, d - o.d}; }
  DeltaQ scaled(const mpq_class& c) const { return {a * c, d * c}; }
};

struct LinAtom {
  // sum of coeff*var compared against the bound; `strict` selects < over <=
  std::vector<std::pair<int, mpq_class>> terms;
  mpq_class bound = 0;
  bool strict = false;
};

class LiaSolver {
 public:
  int add_var(bool is_int) {
    is_int_.push_back(is_int);
    return static_cast<int>(is_int_.size()) - 1;
  }

  int add_atom(LinAtom a) {
    atoms_.push_back(std::move(a));
    return static_cast<int>(atoms_.size()) - 1;
  }

  size_t num_atoms() const { return atoms_.size(); }
  const LinAtom& atom(int i) const { return atoms_[i]; }

  struct Result {
    bool feasible = false;
    std::vector<mpq_class> model;  // per variable, when feasible
    std::vector<int> conflict;     // indices into the asserted vector otherwise
  };

  // Decides the conjunction of atoms_[i] (or their negations) given by
  // `asserted`. Self-contained: no state survives between calls.
  Result check(const std::vector<std::pair<int, bool>>& asserted,
               long node_budget = 20000) {
    Tableau t;
    for (size_t i = 0; i < is_int_.size(); i++) t.add_structural(is_int_[i]);
    for (size_t ai = 0; ai < asserted.size(); ai++) {
      auto [atom_idx, polarity] = asserted[ai];
      const LinAtom& a = atoms_[atom_idx];
      // positive: terms <= bound (or <). negative: terms >= bound (or >),
      // i.e. -terms <= -bound with flipped strictness.
      std::vector<std::pair<int, mpq_class>> ts = a.terms;
      mpq_class b = a.bound;
      bool strict = a.strict;
      if (!polarity) {
        for (auto& [v, c] : ts) c = -c;
        b = -b;
        strict = !strict;
      }
      t.assert_upper(ts, b, strict, static_cast<int>(ai));
      if (!t.conflict.empty()) {
        Result r;
        r.conflict = t.conflict;
        return r;
      }
    }
    long budget = node_budget;
    Result r = t.solve_int(budget);
    if (!r.feasible && r.conflict.empty()) {
      // integer-level infeasibility: coarse conflict over everything asserted
      for (size_t ai = 0; ai < asserted.size(); ai++)
        r.conflict.push_back(static_cast<int>(ai));
    }
    return r;
  }

 private:
  std::vector<bool> is_int_;
  std::vector<LinAtom> atoms_;

  struct Bound {
    DeltaQ val;
    int provenance = -1;  // asserted index, -1 for artificial bounds
  };

  struct Tableau {
    // variables: structurals first, then one slack per distinct row
    std::vector<bool> vint;
    std::vector<std::optional<Bound>> lo, hi;
    std::vector<DeltaQ> beta;
    std::vector<int> basic_row;                    // var -> row index or -1
    std::vector<std::map<int, mpq_class>> rows;    // row -> structural coeffs
    std::vector<int> row_owner;                    // row -> slack var
    std::map<std::vector<std::pair<int, mpq_class>>, int> slack_of;
    std::vector<int> conflict;
    int n_structural = 0;

    void add_structural(bool is_int) {
      vint.push_back(is_int);
      lo.emplace_back();
      hi.emplace_back();
      beta.push_back({});
      basic_row.push_back(-1);
      n_structural++;
    }

    // Registers terms <= bound (strict or not) with the given provenance.
    void assert_upper(std::vector<std::pair<int, mpq_class>> ts, mpq_class b,
                      bool strict, int prov) {
      normalize(ts);
      if (ts.empty()) {
        bool holds = strict ? (0 < b) : (0 <= b);
        if (!holds) conflict = {prov};
        return;
      }
      // canonical orientation: first coefficient positive. When flipped the
      // constraint reads ts >= -b, handled below by negating the final bound.
      bool flipped = false;
      if (ts[0].second < 0) {
        for (auto& [v, c] : ts) c = -c;
        flipped = true;
      }
      if (int_valued(ts)) {
        // divide through by the coefficient gcd; with the later floor
        // tightening this refutes e.g. 2x + 4y = 3 outright
        mpz_class g = ts[0].second.get_num();
        for (auto& [v, c] : ts)
          mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), c.get_num_mpz_t());
        if (g > 1) {
          mpq_class gq(g);
          for (auto& [v, c] : ts) c /= gq;
          b /= gq;
        }
      }
      int x;
      if (ts.size() == 1 && ts[0].second == 1) {
        x = ts[0].first;
      } else {
        x = slack_for(ts);
      }
      DeltaQ bound{b, strict ? mpq_class(-1) : mpq_class(0)};
      if (int_valued(ts) ) {
        // integral left-hand side: tighten to a non-strict integer bound
        mpq_class fb = floor_q(b);
        if (strict && fb == b) fb -= 1;
        bound = {fb, 0};
      }
      if (!flipped)
        set_upper(x, bound, prov);
      else
        set_lower(x, DeltaQ{-bound.a, -bound.d}, prov);
    }

    static void normalize(std::vector<std::pair<int, mpq_class>>& ts) {
      std::map<int, mpq_class> acc;
      for (auto& [v, c] : ts) acc[v] += c;
      ts.clear();
      for (auto& [v, c] : acc)
        if (c != 0) ts.emplace_back(v, c);
    }

    bool int_valued(const std::vector<std::pair<int, mpq_class>>& ts) const {
      for (const auto& [v, c] : ts)
        if (!vint[v] || c.get_den() != 1) return false;
      return true;
    }

    static mpq_class floor_q(const mpq_class& q) {
      mpz_class fl;
      mpz_fdiv_q(fl.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
      return mpq_class(fl);
    }

    int slack_for(const std::vector<std::pair<int, mpq_class>>& ts) {
      auto it = slack_of.find(ts);
      if (it != slack_of.end()) return it->second;
      int s = static_cast<int>(vint.size());
      vint.push_back(int_valued(ts));
      lo.emplace_back();
      hi.emplace_back();
      basic_row.push_back(static_cast<int>(rows.size()));
      std::map<int, mpq_class> row(ts.begin(), ts.end());
      DeltaQ v{};
      for (auto& [x, c] : row) v = v + beta[x].scaled(c);
      beta.push_back(v);
      rows.push_back(std::move(row));
      row_owner.push_back(s);
      slack_of.emplace(ts, s);
      return s;
    }

    void set_upper(int x, DeltaQ b, int prov) {
      if (hi[x] && hi[x]->val <= b) return;
      if (lo[x] && b < lo[x]->val) {
        conflict.clear();
        if (prov >= 0) conflict.push_back(prov);
        if (lo[x]->provenance >= 0) conflict.push_back(lo[x]->provenance);
        if (conflict.empty()) conflict.push_back(-1);
        return;
      }
      hi[x] = Bound{b, prov};
      if (basic_row[x] < 0 && b < beta[x]) update_nonbasic(x, b);
    }

    void set_lower(int x, DeltaQ b, int prov) {
      if (lo[x] && b <= lo[x]->val) return;
      if (hi[x] && hi[x]->val < b) {
        conflict.clear();
        if (prov >= 0) conflict.push_back(prov);
        if (hi[x]->provenance >= 0) conflict.push_back(hi[x]->provenance);
        if (conflict.empty()) conflict.push_back(-1);
        return;
      }
      lo[x] = Bound{b, prov};
      if (basic_row[x] < 0 && beta[x] < b) update_nonbasic(x, b);
    }

    void update_nonbasic(int x, DeltaQ v) {
      DeltaQ delta = v - beta[x];
      beta[x] = v;
      for (size_t r = 0; r < rows.size(); r++) {
        auto it = rows[r].find(x);
        if (it != rows[r].end()) beta[row_owner[r]] = beta[row_owner[r]] + delta.scaled(it->second);
      }
    }

    // One simplex run with Bland's rule. Fills `conflict` on infeasibility.
    bool simplex() {
      for (;;) {
        int xb = -1;
        bool need_up = false;
        for (size_t v = 0; v < vint.size(); v++) {
          if (basic_row[v] < 0) continue;
          if (lo[v] && beta[v] < lo[v]->val) {
            xb = static_cast<int>(v);
            need_up = true;
            break;
          }
          if (hi[v] && hi[v]->val < beta[v]) {
            xb = static_cast<int>(v);
            need_up = false;
            break;
          }
        }
        if (xb < 0) return true;
        std::map<int, mpq_class>& row = rows[basic_row[xb]];
        int xn = -1;
        for (auto& [v, c] : row) {
          bool can;
          if (need_up)
            can = (c > 0) ? (!hi[v] || beta[v] < hi[v]->val)
                          : (!lo[v] || lo[v]->val < beta[v]);
          else
            can = (c > 0) ? (!lo[v] || lo[v]->val < beta[v])
                          : (!hi[v] || beta[v] < hi[v]->val);
          if (can) {
            xn = v;
            break;
          }
        }
        if (xn < 0) {
          conflict.clear();
          const Bound& vb = need_up ? *lo[xb] : *hi[xb];
          if (vb.provenance >= 0) conflict.push_back(vb.provenance);
          for (auto& [v, c] : row) {
            bool upper = need_up ? (c > 0) : (c < 0);
            const std::optional<Bound>& b2 = upper ? hi[v] : lo[v];
            if (b2 && b2->provenance >= 0) conflict.push_back(b2->provenance);
          }
          if (conflict.empty()) conflict.push_back(-1);
          return false;
        }
        DeltaQ target = need_up ? lo[xb]->val : hi[xb]->val;
        pivot(xb, xn, target);
      }
    }

    void pivot(int xb, int xn, DeltaQ target) {
      int r = basic_row[xb];
      std::map<int, mpq_class> row = rows[r];
      mpq_class a = row[xn];
      // value updates use the coefficients as they are before substitution
      DeltaQ dxn = (target - beta[xb]).scaled(1 / a);
      beta[xb] = target;
      beta[xn] = beta[xn] + dxn;
      for (size_t r2 = 0; r2 < rows.size(); r2++) {
        if (static_cast<int>(r2) == r) continue;
        auto it = rows[r2].find(xn);
        if (it != rows[r2].end())
          beta[row_owner[r2]] = beta[row_owner[r2]] + dxn.scaled(it->second);
      }
      // xb = sum(row); solve for xn
      std::map<int, mpq_class> nrow;
      nrow[xb] = 1 / a;
      for (auto& [v, c] : row)
        if (v != xn) nrow[v] = -c / a;
      // substitute xn away in every other row
      for (size_t r2 = 0; r2 < rows.size(); r2++) {
        if (static_cast<int>(r2) == r) continue;
        auto it = rows[r2].find(xn);
        if (it == rows[r2].end()) continue;
        mpq_class c2 = it->second;
        rows[r2].erase(it);
        for (auto& [v, c] : nrow) {
          mpq_class nc = rows[r2][v] + c2 * c;
          if (nc == 0)
            rows[r2].erase(v);
          else
            rows[r2][v] = nc;
        }
      }
      rows[r] = std::move(nrow);
      row_owner[r] = xn;
      basic_row[xn] = r;
      basic_row[xb] = -1;
    }

    // Branch and bound on integer structural variables. The depth cap keeps
    // divergent unbounded searches from exhausting the call stack before the
    // node budget triggers.
    Result solve_int(long& budget, int depth = 0) {
      if (--budget < 0) fail_resource("integer branch-and-bound budget exhausted");
      if (depth > 400) fail_resource("integer branch-and-bound depth exceeded");
      if (!simplex()) {
        Result r;
        r.conflict = conflict;
        conflict.clear();
        return r;
      }
      int bv = -1;
      DeltaQ bval;
      for (int v = 0; v < n_structural; v++) {
        if (!vint[v]) continue;
        if (!integral(beta[v])) {
          bv = v;
          bval = beta[v];
          break;
        }
      }
      if (bv < 0) {
        Result r;
        r.feasible = true;
        r.model = materialize();
        return r;
      }
      mpq_class L = branch_floor(bval);
      {
        Tableau t2 = *this;
        t2.set_upper(bv, DeltaQ{L, 0}, -1);
        if (t2.conflict.empty()) {
          Result r = t2.solve_int(budget, depth + 1);
          if (r.feasible) return r;
          if (!r.conflict.empty() && touches_artificial(r.conflict)) r.conflict.clear();
          // fall through to the other branch regardless; conflicts from
          // branches are not usable as toplevel explanations
        }
      }
      {
        Tableau t2 = *this;
        t2.set_lower(bv, DeltaQ{L + 1, 0}, -1);
        if (t2.conflict.empty()) {
          Result r = t2.solve_int(budget, depth + 1);
          if (r.feasible) return r;
        }
      }
      Result r;  // infeasible, no usable conflict: caller coarsens
      return r;
    }

    static bool touches_artificial(const std::vector<int>& confl) {
      for (int c : confl)
        if (c < 0) return true;
      return false;
    }

    static bool integral(const DeltaQ& v) {
      return v.d == 0 && v.a.get_den() == 1;
    }

    static mpq_class branch_floor(const DeltaQ& v) {
      if (v.a.get_den() == 1) {
        // integer rational part, nonzero delta decides the side
        return v.d < 0 ? v.a - 1 : v.a;
      }
      return floor_q(v.a);
    }

    // Picks a concrete epsilon and returns rational values for all variables.
    std::vector<mpq_class> materialize() const {
      mpq_class eps(1);
      for (int tries = 0; tries < 128; tries++) {
        bool ok = true;
        for (size_t v = 0; v < vint.size() && ok; v++) {
          mpq_class val = beta[v].a + beta[v].d * eps;
          if (lo[v]) {
            mpq_class lb = lo[v]->val.a + lo[v]->val.d * eps;
            if (!(lb <= val)) ok = false;
          }
          if (hi[v] && ok) {
            mpq_class ub = hi[v]->val.a + hi[v]->val.d * eps;
            if (!(val <= ub)) ok = false;
          }
        }
        if (ok) {
          std::vector<mpq_class> out;
          for (size_t v = 0; v < vint.size(); v++) out.push_back(beta[v].a + beta[v].d * eps);
          out.resize(vint.size());
          return out;
        }
        eps /= 2;
      }
      fail_internal("could not materialize a delta-rational model");
    }
  };
};

}  // namespace qivc::fm
