#pragma once

// Deterministic text form of terms. The same term always prints to the same
// byte sequence: the term DAG is canonical by construction and the printer
// performs a fixed-order traversal with no name generation.

#include <string>

#include "qivc/logic/term.hpp"

namespace qivc {

enum class PrintStyle {
  Smt,     // for solver input; primed occurrences must be resolved beforehand
  System,  // the transition-system input format; prints (next x)
};

inline void print_term_rec(const TermManager& tm, Term t, PrintStyle style,
                           std::string& out) {
  switch (tm.op(t)) {
    case Op::True:
      out += "true";
      return;
    case Op::False:
      out += "false";
      return;
    case Op::Var:
    case Op::Const:
      out += tm.name_of(t);
      return;
    case Op::IntLit: {
      int64_t v = tm.payload(t);
      if (v < 0) {
        out += "(- ";
        out += std::to_string(-v);
        out += ")";
      } else {
        out += std::to_string(v);
      }
      return;
    }
    case Op::EnumLit:
      out += tm.sort(tm.sort_of(t)).ctors[tm.payload(t)];
      return;
    case Op::Next:
      if (style != PrintStyle::System)
        fail_internal("primed occurrence reached the solver printer");
      out += "(next ";
      out += tm.name_of(tm.child(t, 0));
      out += ")";
      return;
    case Op::Apply: {
      out += "(";
      out += tm.func(t).name;
      for (size_t i = 0; i < tm.arity(t); i++) {
        out += " ";
        print_term_rec(tm, tm.child(t, i), style, out);
      }
      out += ")";
      return;
    }
    case Op::Forall:
    case Op::Exists: {
      out += tm.op(t) == Op::Forall ? "(forall (" : "(exists (";
      size_t k = tm.binder_arity(t);
      for (size_t i = 0; i < k; i++) {
        if (i) out += " ";
        Term v = tm.binder_var(t, i);
        out += "(";
        out += tm.name_of(v);
        out += " ";
        out += tm.sort_name(tm.sort_of(v));
        out += ")";
      }
      out += ") ";
      print_term_rec(tm, tm.binder_body(t), style, out);
      out += ")";
      return;
    }
    default: {
      const char* head = nullptr;
      switch (tm.op(t)) {
        case Op::Select: head = "select"; break;
        case Op::Eq: head = "="; break;
        case Op::Le: head = "<="; break;
        case Op::Lt: head = "<"; break;
        case Op::Add: head = "+"; break;
        case Op::Mul: head = "*"; break;
        case Op::Not: head = "not"; break;
        case Op::And: head = "and"; break;
        case Op::Or: head = "or"; break;
        case Op::Implies: head = "=>"; break;
        case Op::Iff: head = "="; break;
        default: fail_internal("unprintable operator");
      }
      out += "(";
      out += head;
      for (size_t i = 0; i < tm.arity(t); i++) {
        out += " ";
        print_term_rec(tm, tm.child(t, i), style, out);
      }
      out += ")";
      return;
    }
  }
}

inline std::string print_term(const TermManager& tm, Term t,
                              PrintStyle style = PrintStyle::Smt) {
  std::string out;
  print_term_rec(tm, t, style, out);
  return out;
}

}  // namespace qivc
