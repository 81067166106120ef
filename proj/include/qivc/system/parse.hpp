#pragma once

// Reader for the transition-system text format:
//   (declare-index-sort NAME)
//   (declare-enum-sort NAME (CONSTRUCTOR...))
//   (declare-var NAME SORT)        SORT ::= Bool|Int|Real|NAME|(Array S T)
//   (declare-frozen NAME SORT)
//   (init FORMULA)
//   (trans FORMULA)                repeatable; the relation is their disjunction
//   (prop FORMULA)
// Primed state reads (next NAME); quantification is over index sort only.
// Errors carry source line and column. Frames keeping frozen variables
// unchanged are conjoined into every transition disjunct here, so later
// stages need no special handling for them.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qivc/logic/ops.hpp"
#include "qivc/system/system.hpp"
#include "qivc/util/sexpr.hpp"

namespace qivc::sys {

namespace detail {

[[noreturn]] inline void perr(const Sexpr& e, const std::string& msg) {
  fail_input(msg + " at line " + std::to_string(e.line) + ", column " +
             std::to_string(e.col));
}

inline void check_fresh(const ArraySystem& s, const Sexpr& at,
                        const std::string& name) {
  if (s.env.sorts.count(name) || s.env.consts.count(name) ||
      s.env.enum_lits.count(name))
    perr(at, "name '" + name + "' is already declared");
}

inline Term read_formula(ArraySystem& s, const Sexpr& e, bool allow_next) {
  s.env.allow_next = allow_next;
  TermReader rd(*s.tm, s.env);
  Term f = rd.read(e);
  s.env.allow_next = false;
  if (s.tm->sort_of(f) != s.tm->bool_sort()) perr(e, "formula expected");
  return f;
}

// next(x) = x for a scalar, pointwise for an array.
inline Term frame_of(TermManager& tm, SortId index_sort, Term x) {
  const SortInfo& si = tm.sort(tm.sort_of(x));
  if (si.kind != SortKind::Array) return tm.mk_eq(tm.mk_next(x), x);
  Term j = tm.mk_var("fz", index_sort);
  return tm.mk_forall(
      {j}, tm.mk_eq(tm.mk_select(tm.mk_next(x), j), tm.mk_select(x, j)));
}

}  // namespace detail

inline ArraySystem parse_system(TermManager& tm, const std::string& text) {
  ArraySystem s;
  s.tm = &tm;
  bool saw_init = false, saw_prop = false;
  SexprReader reader(text);
  Sexpr e;
  while (reader.next(e)) {
    if (!e.is_list() || e.size() < 1 || !e[0].is_atom)
      detail::perr(e, "expected a (directive ...) form");
    const std::string& head = e[0].atom;

    if (head == "declare-index-sort") {
      if (e.size() != 2 || !e[1].is_atom) detail::perr(e, "malformed declare-index-sort");
      if (s.index_sort != 0)
        detail::perr(e, "only one index sort is supported; '" +
                            tm.sort(s.index_sort).name + "' is already declared");
      detail::check_fresh(s, e[1], e[1].atom);
      s.index_sort = tm.index_sort(e[1].atom);
      s.env.sorts.emplace(e[1].atom, s.index_sort);
    } else if (head == "declare-enum-sort") {
      if (e.size() != 3 || !e[1].is_atom || !e[2].is_list())
        detail::perr(e, "malformed declare-enum-sort");
      detail::check_fresh(s, e[1], e[1].atom);
      std::vector<std::string> ctors;
      for (const Sexpr& c : e[2].items) {
        if (!c.is_atom) detail::perr(c, "constructor must be a symbol");
        ctors.push_back(c.atom);
      }
      SortId es = tm.enum_sort(e[1].atom, ctors);
      s.enum_sorts.push_back(es);
      s.env.sorts.emplace(e[1].atom, es);
      s.env.add_enum(tm, es);
    } else if (head == "declare-var" || head == "declare-frozen") {
      if (e.size() != 3 || !e[1].is_atom) detail::perr(e, "malformed " + head);
      detail::check_fresh(s, e[1], e[1].atom);
      TermReader rd(tm, s.env);
      SortId vs = rd.read_sort(e[2]);
      Term c = tm.mk_const(e[1].atom, vs);
      s.env.consts.emplace(e[1].atom, c);
      s.vars.push_back(StateVar{e[1].atom, c, head == "declare-frozen"});
    } else if (head == "init") {
      if (e.size() != 2) detail::perr(e, "init takes one formula");
      if (saw_init) detail::perr(e, "init is declared twice");
      s.init = detail::read_formula(s, e[1], false);
      saw_init = true;
    } else if (head == "trans") {
      if (e.size() != 2) detail::perr(e, "trans takes one formula");
      s.trans.push_back(detail::read_formula(s, e[1], true));
    } else if (head == "prop") {
      if (e.size() != 2) detail::perr(e, "prop takes one formula");
      if (saw_prop) detail::perr(e, "prop is declared twice");
      s.prop = detail::read_formula(s, e[1], false);
      saw_prop = true;
    } else {
      detail::perr(e, "unknown directive '" + head + "'");
    }
  }
  if (!saw_init) fail_input("the system has no (init ...) formula");
  if (s.trans.empty()) fail_input("the system has no (trans ...) formula");
  if (!saw_prop) fail_input("the system has no (prop ...) formula");

  std::vector<Term> frames;
  for (const StateVar& v : s.vars)
    if (v.frozen) frames.push_back(detail::frame_of(tm, s.index_sort, v.sym));
  if (!frames.empty())
    for (Term& d : s.trans) d = tm.mk_and({d, tm.mk_and(frames)});
  return s;
}

inline ArraySystem parse_system_file(TermManager& tm, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_input("cannot open system file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_system(tm, text.str());
}

}  // namespace qivc::sys
