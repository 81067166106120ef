#pragma once

// Array-based transition systems: scalar and array state variables over one
// uninterpreted index sort, an initial formula, a transition relation kept as
// an explicit disjunct list, and a candidate invariant property. Systems are
// immutable once parsed and safe to share.

#include <string>
#include <vector>

#include "qivc/logic/read.hpp"
#include "qivc/logic/term.hpp"
#include "qivc/util/error.hpp"

namespace qivc::sys {

struct StateVar {
  std::string name;
  Term sym;
  bool frozen = false;
};

struct ArraySystem {
  TermManager* tm = nullptr;
  SortId index_sort = 0;  // 0 when the system declares none
  std::vector<SortId> enum_sorts;
  std::vector<StateVar> vars;
  Term init;
  std::vector<Term> trans;  // disjuncts; frozen-variable frames already conjoined
  Term prop;
  SymbolEnv env;  // read further formulas over the system's vocabulary

  Term trans_or() const { return tm->mk_or(trans); }

  const StateVar* find(const std::string& name) const {
    for (const StateVar& v : vars)
      if (v.name == name) return &v;
    return nullptr;
  }

  bool is_state(Term c) const {
    for (const StateVar& v : vars)
      if (v.sym == c) return true;
    return false;
  }

  // State variables whose values range over the index sort itself; these are
  // the symbols needing totality constraints in ground instances.
  std::vector<Term> index_codomain_vars() const {
    std::vector<Term> out;
    for (const StateVar& v : vars) {
      const SortInfo& si = tm->sort(tm->sort_of(v.sym));
      if (si.kind == SortKind::Index ||
          (si.kind == SortKind::Array && tm->sort(si.elem).kind == SortKind::Index))
        out.push_back(v.sym);
    }
    return out;
  }
};

}  // namespace qivc::sys
