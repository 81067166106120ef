#pragma once

// Encoding of ground (quantifier-expanded) formulas over a finite index
// universe into SAT plus linear arithmetic. Every applied occurrence of an
// uninterpreted symbol becomes a "cell" keyed by the symbol and a concrete
// argument tuple; index-sorted cells and constants get one-hot selector
// variables over the universe, enum cells get one-hot constructor selectors,
// numeric cells get simplex variables, and applications with symbolic index
// arguments get alias cells tied to the concrete cells by guarded equalities.
// Arithmetic atoms are checked lazily: propositionally satisfying assignments
// are validated by the simplex core and refuted with conflict clauses.

#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "qivc/fm/lia.hpp"
#include "qivc/fm/sat.hpp"
#include "qivc/logic/eval.hpp"
#include "qivc/logic/ops.hpp"
#include "qivc/logic/term.hpp"

namespace qivc::fm {

// (symbol, concrete argument tuple). Scalars use an empty tuple. Alias cells
// for applications with symbolic arguments use the application term itself
// with an empty tuple.
struct CellKey {
  uint32_t sym = 0;  // Const/Apply-term id or function id, disambiguated by tag
  bool is_func = false;
  std::vector<int> args;
  bool operator<(const CellKey& o) const {
    if (sym != o.sym) return sym < o.sym;
    if (is_func != o.is_func) return is_func < o.is_func;
    return args < o.args;
  }
};

struct FmModel {
  int k = 1;
  std::map<Term, int> const_elem;
  std::map<Term, Value> scalars;
  std::map<std::pair<Term, int>, Value> array_cells;
  std::map<std::pair<uint32_t, std::vector<int>>, Value> func_cells;
};

class GroundEncoder {
 public:
  GroundEncoder(TermManager& tm, int k, const std::map<Term, int>& universe_elems)
      : tm_(tm), k_(k), elem_id_(universe_elems) {
    int tv = sat_.new_var();
    sat_.add_clause({mk_lit(tv)});
    true_lit_ = mk_lit(tv);
  }

  int universe_size() const { return k_; }

  Lit true_lit() const { return true_lit_; }

  void assert_formula(Term t) { sat_.add_clause({encode(t)}); }

  Lit guard_formula(Term t) {
    Lit g = mk_lit(sat_.new_var());
    sat_.add_clause({lit_neg(g), encode(t)});
    return g;
  }

  enum class Out { Sat, Unsat };

  Out solve(const std::vector<Lit>& assumptions = {}) {
    for (;;) {
      if (sat_.solve(assumptions) == SatSolver::Res::Unsat) return Out::Unsat;
      if (lia_registry_.empty()) return Out::Sat;
      std::vector<std::pair<int, bool>> asserted;
      for (auto& [lit, atom] : lia_registry_)
        asserted.emplace_back(atom, sat_.model_value(lit_var(lit)) != lit_sign(lit));
      LiaSolver::Result r = lia_.check(asserted);
      if (r.feasible) {
        lia_model_ = std::move(r.model);
        return Out::Sat;
      }
      std::vector<Lit> blocking;
      for (int ci : r.conflict) {
        if (ci < 0) continue;
        auto [lit, atom] = lia_registry_[ci];
        bool asserted_pos = asserted[ci].second;
        blocking.push_back(asserted_pos ? lit_neg(lit) : lit);
      }
      if (blocking.empty()) fail_internal("arithmetic conflict without provenance");
      sat_.add_clause(std::move(blocking));
    }
  }

  const std::vector<Lit>& conflict() const { return sat_.conflict(); }

  FmModel extract_model() {
    FmModel m;
    m.k = k_;
    for (auto& [key, slot] : cells_) {
      Value v = slot_value(slot);
      if (key.is_func) {
        m.func_cells[{key.sym, key.args}] = v;
        continue;
      }
      Term sym{key.sym};
      if (tm_.op(sym) == Op::Const) {
        SortKind sk = tm_.sort(tm_.sort_of(sym)).kind;
        if (sk == SortKind::Array) {
          m.array_cells[{sym, key.args[0]}] = v;
        } else if (sk == SortKind::Index) {
          m.const_elem[sym] = v.e;
        } else {
          m.scalars[sym] = v;
        }
      }
      // alias cells (whole-application keys) carry no standalone meaning
    }
    // fold alias cells into concrete tables now that indices are known
    for (auto& [term, key] : alias_of_) {
      Term t{term};
      Value v = slot_value(cells_.at(key));
      if (tm_.op(t) == Op::Select) {
        Term arr = tm_.child(t, 0);
        int e = resolve_model_elem(tm_.child(t, 1), m);
        m.array_cells.insert({{arr, e}, v});
      } else if (tm_.op(t) == Op::Apply) {
        std::vector<int> tup;
        for (Term a : tm_.children(t)) tup.push_back(resolve_model_elem(a, m));
        m.func_cells.insert({{static_cast<uint32_t>(tm_.payload(t)), tup}, v});
      }
    }
    return m;
  }

  // ---- encoding ----

  Lit encode(Term t) {
    auto it = form_cache_.find(t);
    if (it != form_cache_.end()) return it->second;
    Lit l = encode_uncached(t);
    form_cache_.emplace(t, l);
    return l;
  }

 private:
  TermManager& tm_;
  int k_;
  std::map<Term, int> elem_id_;
  SatSolver sat_;
  LiaSolver lia_;
  Lit true_lit_;
  std::vector<mpq_class> lia_model_;

  struct NumSlot {
    int var;
  };
  struct EnumSlot {
    std::vector<Lit> sel;
    SortId sort;
  };
  struct IdxSlot {
    std::vector<Lit> sel;
  };
  // bool, numeric, enum, index
  using Slot = std::variant<Lit, NumSlot, EnumSlot, IdxSlot>;

  std::map<CellKey, Slot> cells_;
  std::map<uint32_t, CellKey> alias_of_;  // application term id -> alias cell
  std::map<Term, Lit> form_cache_;
  std::map<std::pair<Term, Term>, Lit> eq_cache_;
  std::vector<std::pair<Lit, int>> lia_registry_;  // (sat lit, lia atom id)
  std::map<std::string, Lit> lia_atom_lit_;        // canonical atom text -> lit

  // ---- slots ----

  Slot make_slot(SortId sort) {
    SortKind kind = tm_.sort(sort).kind;
    switch (kind) {
      case SortKind::Bool:
        return mk_lit(sat_.new_var());
      case SortKind::Int:
      case SortKind::Real:
        return NumSlot{lia_.add_var(kind == SortKind::Int)};
      case SortKind::Enum: {
        EnumSlot s;
        s.sort = sort;
        size_t n = tm_.sort(sort).ctors.size();
        for (size_t i = 0; i < n; i++) s.sel.push_back(mk_lit(sat_.new_var()));
        exactly_one(s.sel);
        return s;
      }
      case SortKind::Index: {
        IdxSlot s;
        for (int i = 0; i < k_; i++) s.sel.push_back(mk_lit(sat_.new_var()));
        exactly_one(s.sel);
        return s;
      }
      default:
        fail_internal("no slot representation for this sort");
    }
  }

  Slot& cell(const CellKey& key, SortId sort) {
    auto it = cells_.find(key);
    if (it != cells_.end()) return it->second;
    return cells_.emplace(key, make_slot(sort)).first->second;
  }

  void exactly_one(const std::vector<Lit>& sel) {
    std::vector<Lit> alo(sel);
    sat_.add_clause(alo);
    for (size_t i = 0; i < sel.size(); i++)
      for (size_t j = i + 1; j < sel.size(); j++)
        sat_.add_clause({lit_neg(sel[i]), lit_neg(sel[j])});
  }

  Value slot_value(const Slot& slot) {
    if (std::holds_alternative<Lit>(slot)) {
      Lit l = std::get<Lit>(slot);
      return Value::of_bool(sat_.model_value(lit_var(l)) != lit_sign(l));
    }
    if (std::holds_alternative<NumSlot>(slot)) {
      int v = std::get<NumSlot>(slot).var;
      if (v < static_cast<int>(lia_model_.size())) return Value::of_num(lia_model_[v]);
      return Value::of_num(0);
    }
    if (std::holds_alternative<EnumSlot>(slot)) {
      const EnumSlot& s = std::get<EnumSlot>(slot);
      for (size_t i = 0; i < s.sel.size(); i++)
        if (sat_.model_value(lit_var(s.sel[i])) != lit_sign(s.sel[i]))
          return Value::of_enum(static_cast<int>(i));
      return Value::of_enum(0);
    }
    const IdxSlot& s = std::get<IdxSlot>(slot);
    for (size_t i = 0; i < s.sel.size(); i++)
      if (sat_.model_value(lit_var(s.sel[i])) != lit_sign(s.sel[i]))
        return Value::of_elem(static_cast<int>(i));
    return Value::of_elem(0);
  }

  int resolve_model_elem(Term t, const FmModel& m) {
    if (auto it = elem_id_.find(t); it != elem_id_.end()) return it->second;
    if (tm_.op(t) == Op::Const) {
      auto it = m.const_elem.find(t);
      return it == m.const_elem.end() ? 0 : it->second;
    }
    // nested application: its alias cell holds the element
    auto ai = alias_of_.find(t.id);
    if (ai != alias_of_.end()) return slot_value(cells_.at(ai->second)).e;
    fail_internal("cannot resolve an index term in the model");
  }

  // ---- index-typed values ----

  // An index-sorted term resolves either to a concrete element or to the
  // selector vector of its cell.
  struct IdxVal {
    int concrete = -1;
    const std::vector<Lit>* sel = nullptr;
  };

  IdxVal index_value(Term t) {
    if (auto it = elem_id_.find(t); it != elem_id_.end()) return {it->second, nullptr};
    Slot& s = term_slot(t);
    return {-1, &std::get<IdxSlot>(s).sel};
  }

  // The slot of an atomic term: a constant, or an application (select/apply)
  // resolved through concrete cells or an alias cell.
  Slot& term_slot(Term t) {
    switch (tm_.op(t)) {
      case Op::Const:
        return cell(CellKey{t.id, false, {}}, tm_.sort_of(t));
      case Op::Select:
      case Op::Apply:
        return application_slot(t);
      default:
        fail_internal("term has no slot: unexpected operator");
    }
  }

  Slot& application_slot(Term t) {
    if (auto it = alias_of_.find(t.id); it != alias_of_.end()) return cells_.at(it->second);

    std::vector<Term> args;
    uint32_t sym;
    bool is_func;
    if (tm_.op(t) == Op::Select) {
      Term arr = tm_.child(t, 0);
      if (tm_.op(arr) != Op::Const) fail_internal("select on a composite array");
      sym = arr.id;
      is_func = false;
      args.push_back(tm_.child(t, 1));
    } else {
      sym = static_cast<uint32_t>(tm_.payload(t));
      is_func = true;
      for (Term a : tm_.children(t)) {
        if (tm_.sort(tm_.sort_of(a)).kind != SortKind::Index)
          fail_capability("uninterpreted functions must take index arguments");
        args.push_back(a);
      }
    }

    std::vector<IdxVal> vals;
    bool all_concrete = true;
    for (Term a : args) {
      vals.push_back(index_value(a));
      all_concrete &= vals.back().concrete >= 0;
    }
    if (all_concrete) {
      std::vector<int> tup;
      for (auto& v : vals) tup.push_back(v.concrete);
      CellKey key{sym, is_func, std::move(tup)};
      Slot& s = cell(key, tm_.sort_of(t));
      return s;
    }

    // alias cell with guarded equalities against each reachable tuple
    CellKey akey{t.id, false, {}};
    cell(akey, tm_.sort_of(t));
    alias_of_.emplace(t.id, akey);
    std::vector<int> tup(args.size(), 0);
    std::vector<Lit> guard;
    link_alias(t, sym, is_func, vals, 0, tup, guard, akey);
    return cells_.at(akey);
  }

  void link_alias(Term t, uint32_t sym, bool is_func, const std::vector<IdxVal>& vals,
                  size_t pos, std::vector<int>& tup, std::vector<Lit>& guard,
                  const CellKey& akey) {
    if (pos == vals.size()) {
      CellKey ckey{sym, is_func, tup};
      Slot concrete = cell(ckey, tm_.sort_of(t));
      Slot alias = cells_.at(akey);
      emit_slot_equality(guard, alias, concrete);
      return;
    }
    if (vals[pos].concrete >= 0) {
      tup[pos] = vals[pos].concrete;
      link_alias(t, sym, is_func, vals, pos + 1, tup, guard, akey);
      return;
    }
    for (int e = 0; e < k_; e++) {
      tup[pos] = e;
      guard.push_back(lit_neg((*vals[pos].sel)[e]));
      link_alias(t, sym, is_func, vals, pos + 1, tup, guard, akey);
      guard.pop_back();
    }
  }

  // guard is a disjunction of negated selector literals; the clause form of
  // "selectors chosen -> alias == concrete"
  void emit_slot_equality(const std::vector<Lit>& guard, const Slot& alias,
                          const Slot& concrete) {
    if (std::holds_alternative<Lit>(alias)) {
      Lit a = std::get<Lit>(alias), c = std::get<Lit>(concrete);
      std::vector<Lit> c1 = guard, c2 = guard;
      c1.push_back(lit_neg(a));
      c1.push_back(c);
      c2.push_back(a);
      c2.push_back(lit_neg(c));
      sat_.add_clause(c1);
      sat_.add_clause(c2);
      return;
    }
    if (std::holds_alternative<NumSlot>(alias)) {
      int a = std::get<NumSlot>(alias).var, c = std::get<NumSlot>(concrete).var;
      Lit le = lia_atom_for({{a, 1}, {c, -1}}, 0, false);
      Lit ge = lia_atom_for({{c, 1}, {a, -1}}, 0, false);
      std::vector<Lit> c1 = guard, c2 = guard;
      c1.push_back(le);
      c2.push_back(ge);
      sat_.add_clause(c1);
      sat_.add_clause(c2);
      return;
    }
    const std::vector<Lit>& asel = std::holds_alternative<EnumSlot>(alias)
                                       ? std::get<EnumSlot>(alias).sel
                                       : std::get<IdxSlot>(alias).sel;
    const std::vector<Lit>& csel = std::holds_alternative<EnumSlot>(concrete)
                                       ? std::get<EnumSlot>(concrete).sel
                                       : std::get<IdxSlot>(concrete).sel;
    // with both sides one-hot, one implication direction per value suffices
    for (size_t v = 0; v < asel.size(); v++) {
      std::vector<Lit> cl = guard;
      cl.push_back(lit_neg(csel[v]));
      cl.push_back(asel[v]);
      sat_.add_clause(cl);
    }
  }

  // ---- arithmetic ----

  struct LinForm {
    std::vector<std::pair<int, mpq_class>> terms;
    mpq_class constant = 0;
  };

  LinForm linform(Term t) {
    switch (tm_.op(t)) {
      case Op::IntLit: {
        LinForm f;
        f.constant = static_cast<long>(tm_.payload(t));
        return f;
      }
      case Op::Add: {
        LinForm f;
        for (Term c : tm_.children(t)) {
          LinForm g = linform(c);
          f.constant += g.constant;
          f.terms.insert(f.terms.end(), g.terms.begin(), g.terms.end());
        }
        return f;
      }
      case Op::Mul: {
        mpq_class c = static_cast<long>(tm_.payload(tm_.child(t, 0)));
        LinForm f = linform(tm_.child(t, 1));
        f.constant *= c;
        for (auto& [v, q] : f.terms) q *= c;
        return f;
      }
      default: {
        Slot& s = term_slot(t);
        LinForm f;
        f.terms.emplace_back(std::get<NumSlot>(s).var, 1);
        return f;
      }
    }
  }

  Lit lia_atom_for(std::vector<std::pair<int, mpq_class>> terms, mpq_class bound,
                   bool strict) {
    LinAtom a;
    a.terms = std::move(terms);
    a.bound = std::move(bound);
    a.strict = strict;
    // canonical text key for caching
    std::string key = strict ? "<" : "L";
    std::map<int, mpq_class> n;
    for (auto& [v, c] : a.terms) n[v] += c;
    a.terms.assign(n.begin(), n.end());
    for (auto& [v, c] : a.terms) key += std::to_string(v) + ":" + c.get_str() + ",";
    key += "|" + a.bound.get_str();
    if (auto it = lia_atom_lit_.find(key); it != lia_atom_lit_.end()) return it->second;
    int id = lia_.add_atom(a);
    Lit l = mk_lit(sat_.new_var());
    lia_registry_.emplace_back(l, id);
    lia_atom_lit_.emplace(key, l);
    return l;
  }

  // ---- formula encoding ----

  Lit encode_uncached(Term t) {
    switch (tm_.op(t)) {
      case Op::True:
        return true_lit_;
      case Op::False:
        return lit_neg(true_lit_);
      case Op::Not:
        return lit_neg(encode(tm_.child(t, 0)));
      case Op::And:
      case Op::Or: {
        bool is_and = tm_.op(t) == Op::And;
        std::vector<Lit> ls;
        for (Term c : tm_.children(t)) ls.push_back(encode(c));
        Lit a = mk_lit(sat_.new_var());
        std::vector<Lit> big{is_and ? a : lit_neg(a)};
        for (Lit l : ls) {
          big.push_back(is_and ? lit_neg(l) : l);
          sat_.add_clause({is_and ? lit_neg(a) : a, is_and ? l : lit_neg(l)});
        }
        sat_.add_clause(big);
        return a;
      }
      case Op::Implies:
        return encode(tm_.mk_or(tm_.mk_not(tm_.child(t, 0)), tm_.child(t, 1)));
      case Op::Iff: {
        Lit a = encode(tm_.child(t, 0));
        Lit b = encode(tm_.child(t, 1));
        Lit r = mk_lit(sat_.new_var());
        sat_.add_clause({lit_neg(r), lit_neg(a), b});
        sat_.add_clause({lit_neg(r), a, lit_neg(b)});
        sat_.add_clause({r, a, b});
        sat_.add_clause({r, lit_neg(a), lit_neg(b)});
        return r;
      }
      case Op::Le:
      case Op::Lt: {
        LinForm l = linform(tm_.child(t, 0));
        LinForm r = linform(tm_.child(t, 1));
        for (auto& [v, c] : r.terms) l.terms.emplace_back(v, -c);
        return lia_atom_for(l.terms, r.constant - l.constant, tm_.op(t) == Op::Lt);
      }
      case Op::Eq:
        return encode_eq(tm_.child(t, 0), tm_.child(t, 1));
      case Op::Const:
      case Op::Select:
      case Op::Apply: {
        if (tm_.sort_of(t) != tm_.bool_sort())
          fail_internal("non-boolean term in formula position");
        return std::get<Lit>(term_slot(t));
      }
      case Op::Forall:
      case Op::Exists:
        fail_internal("quantifier reached the ground encoder");
      default:
        fail_internal("unencodable operator");
    }
  }

  Lit encode_eq(Term a, Term b) {
    SortKind kind = tm_.sort(tm_.sort_of(a)).kind;
    if (kind == SortKind::Int || kind == SortKind::Real) {
      LinForm l = linform(a);
      LinForm r = linform(b);
      for (auto& [v, c] : r.terms) l.terms.emplace_back(v, -c);
      mpq_class bound = r.constant - l.constant;
      Lit le = lia_atom_for(l.terms, bound, false);
      std::vector<std::pair<int, mpq_class>> neg;
      for (auto& [v, c] : l.terms) neg.emplace_back(v, -c);
      Lit ge = lia_atom_for(neg, -bound, false);
      return encode_and2(le, ge);
    }
    if (kind == SortKind::Enum) {
      std::vector<Lit> asel = enum_selectors(a);
      std::vector<Lit> bsel = enum_selectors(b);
      return selector_eq(asel, bsel);
    }
    if (kind == SortKind::Index) {
      IdxVal va = index_value(a);
      IdxVal vb = index_value(b);
      if (va.concrete >= 0 && vb.concrete >= 0)
        return va.concrete == vb.concrete ? true_lit_ : lit_neg(true_lit_);
      if (va.concrete >= 0) return (*vb.sel)[va.concrete];
      if (vb.concrete >= 0) return (*va.sel)[vb.concrete];
      return selector_eq(*va.sel, *vb.sel);
    }
    fail_internal("unsupported equality sort in the encoder");
  }

  std::vector<Lit> enum_selectors(Term t) {
    if (tm_.op(t) == Op::EnumLit) {
      // unit selector vector: true at the constructor position
      std::vector<Lit> sel(tm_.sort(tm_.sort_of(t)).ctors.size(), lit_neg(true_lit_));
      sel[tm_.payload(t)] = true_lit_;
      return sel;
    }
    return std::get<EnumSlot>(term_slot(t)).sel;
  }

  Lit selector_eq(const std::vector<Lit>& a, const std::vector<Lit>& b) {
    std::vector<Lit> disj;
    for (size_t i = 0; i < a.size(); i++) disj.push_back(encode_and2(a[i], b[i]));
    return encode_orv(disj);
  }

  Lit encode_and2(Lit a, Lit b) {
    if (a == true_lit_) return b;
    if (b == true_lit_) return a;
    if (a == lit_neg(true_lit_) || b == lit_neg(true_lit_)) return lit_neg(true_lit_);
    Lit r = mk_lit(sat_.new_var());
    sat_.add_clause({lit_neg(r), a});
    sat_.add_clause({lit_neg(r), b});
    sat_.add_clause({r, lit_neg(a), lit_neg(b)});
    return r;
  }

  Lit encode_orv(const std::vector<Lit>& ls) {
    Lit r = mk_lit(sat_.new_var());
    std::vector<Lit> big{lit_neg(r)};
    for (Lit l : ls) {
      big.push_back(l);
      sat_.add_clause({r, lit_neg(l)});
    }
    sat_.add_clause(big);
    return r;
  }
};

}  // namespace qivc::fm
