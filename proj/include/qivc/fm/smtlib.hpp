#pragma once

// Command loop speaking an SMT-LIB style protocol on a stream pair. Supports
// the command subset the verification engines drive over a pipe: sort and
// symbol declarations, named assertions, push/pop, check-sat, model and
// value queries, unsatisfiable cores, and sequence interpolants. Identifier
// declarations are global and survive pop, matching how the clients reuse
// symbols across query scopes. Errors never kill the loop: each command
// either succeeds or answers (error "..."), and :print-success gives the
// client a synchronization point after silent commands.

#include <cctype>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "qivc/fm/engine.hpp"
#include "qivc/fm/interp.hpp"
#include "qivc/logic/read.hpp"
#include "qivc/util/sexpr.hpp"

namespace qivc::fm {

class SmtRepl {
 public:
  SmtRepl(std::istream& in, std::ostream& out) : in_(in), out_(out) {
    env_.allow_next = false;
  }

  int run() {
    std::string chunk;
    while (read_command(chunk)) {
      Sexpr cmd;
      try {
        SexprReader reader(chunk);
        if (!reader.next(cmd)) continue;
        if (!dispatch(cmd)) return 0;
      } catch (const Error& e) {
        respond_error(e.what());
      } catch (const std::exception& e) {
        respond_error(e.what());
      }
    }
    return 0;
  }

 private:
  std::istream& in_;
  std::ostream& out_;
  FmEngine eng_;
  SymbolEnv env_;
  bool print_success_ = false;

  // Accumulates one toplevel s-expression (or bare atom) from the stream.
  bool read_command(std::string& out) {
    out.clear();
    int depth = 0;
    bool started = false, in_str = false, in_bar = false, in_comment = false;
    char ch;
    while (in_.get(ch)) {
      if (in_comment) {
        if (ch == '\n') in_comment = false;
        continue;
      }
      if (in_str) {
        out += ch;
        if (ch == '"') {
          if (in_.peek() == '"') {
            in_.get(ch);
            out += ch;
          } else {
            in_str = false;
          }
        }
        continue;
      }
      if (in_bar) {
        out += ch;
        if (ch == '|') in_bar = false;
        continue;
      }
      if (ch == ';') {
        in_comment = true;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (depth == 0 && started) return true;
        if (depth > 0) out += ch;
        continue;
      }
      started = true;
      out += ch;
      if (ch == '"') in_str = true;
      if (ch == '|') in_bar = true;
      if (ch == '(') depth++;
      if (ch == ')') {
        depth--;
        if (depth <= 0) return true;
      }
    }
    return started;
  }

  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      out += c;
      if (c == '"') out += c;
    }
    return out;
  }

  void respond_error(const std::string& msg) {
    out_ << "(error \"" << escape(msg) << "\")" << std::endl;
  }

  void success() {
    if (print_success_) out_ << "success" << std::endl;
  }

  void reply(const std::string& s) { out_ << s << std::endl; }

  void check_unique(const Sexpr& at, const std::string& name) {
    if (env_.sorts.count(name) || env_.consts.count(name) ||
        env_.funcs.count(name) || env_.enum_lits.count(name))
      fail_input("'" + name + "' is already declared at line " +
                 std::to_string(at.line));
  }

  Term parse_term(const Sexpr& e) {
    TermReader r(eng_.tm(), env_);
    return r.read(e);
  }

  SortId parse_sort(const Sexpr& e) {
    TermReader r(eng_.tm(), env_);
    return r.read_sort(e);
  }

  static const std::string& atom_at(const Sexpr& e, size_t i, const char* what) {
    if (i >= e.size() || !e[i].is_atom) fail_input(std::string("malformed ") + what);
    return e[i].atom;
  }

  // returns false only for (exit)
  bool dispatch(const Sexpr& cmd) {
    if (cmd.is_atom) fail_input("expected a command, got '" + cmd.atom + "'");
    if (cmd.size() == 0 || !cmd[0].is_atom) fail_input("malformed command");
    const std::string& head = cmd[0].atom;

    if (head == "exit") return false;

    if (head == "set-logic" || head == "set-info") {
      success();
      return true;
    }

    if (head == "set-option") {
      const std::string& opt = atom_at(cmd, 1, "set-option");
      if (opt == ":print-success") {
        print_success_ = atom_at(cmd, 2, "set-option") == "true";
      } else if (opt == ":qivc-max-universe") {
        eng_.max_universe = std::stoi(atom_at(cmd, 2, "set-option"));
        if (eng_.max_universe < 1) fail_input("universe cap must be positive");
      } else if (opt != ":produce-models" && opt != ":produce-unsat-cores" &&
                 opt != ":produce-interpolants") {
        reply("unsupported");
        return true;
      }
      success();
      return true;
    }

    if (head == "echo") {
      std::string s = atom_at(cmd, 1, "echo");
      if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        s = s.substr(1, s.size() - 2);
      reply(s);
      return true;
    }

    if (head == "declare-sort") {
      const std::string& name = atom_at(cmd, 1, "declare-sort");
      if (cmd.size() > 2 && atom_at(cmd, 2, "declare-sort") != "0")
        fail_capability("only nullary sorts are supported");
      check_unique(cmd[1], name);
      env_.sorts[name] = eng_.declare_index_sort(name);
      success();
      return true;
    }

    if (head == "declare-datatype") {
      const std::string& name = atom_at(cmd, 1, "declare-datatype");
      if (cmd.size() != 3 || !cmd[2].is_list() || cmd[2].size() == 0)
        fail_input("malformed declare-datatype");
      std::vector<std::string> ctors;
      for (const Sexpr& c : cmd[2].items) {
        if (c.is_atom) {
          ctors.push_back(c.atom);
        } else if (c.size() == 1 && c[0].is_atom) {
          ctors.push_back(c[0].atom);
        } else {
          fail_capability("only nullary constructors are supported");
        }
      }
      check_unique(cmd[1], name);
      for (const std::string& c : ctors) check_unique(cmd[1], c);
      SortId s = eng_.tm().enum_sort(name, ctors);
      env_.sorts[name] = s;
      env_.add_enum(eng_.tm(), s);
      success();
      return true;
    }

    if (head == "declare-const" || head == "declare-fun") {
      bool is_fun = head == "declare-fun";
      const std::string& name = atom_at(cmd, 1, head.c_str());
      size_t sort_pos = is_fun ? 3 : 2;
      if (cmd.size() != sort_pos + 1 || (is_fun && !cmd[2].is_list()))
        fail_input("malformed " + head);
      check_unique(cmd[1], name);
      if (!is_fun || cmd[2].size() == 0) {
        Term c = eng_.tm().mk_const(name, parse_sort(cmd[sort_pos]));
        env_.consts[name] = c;
        eng_.register_const(c);
      } else {
        std::vector<SortId> args;
        for (const Sexpr& a : cmd[2].items) args.push_back(parse_sort(a));
        uint32_t f = eng_.tm().mk_func(name, args, parse_sort(cmd[sort_pos]));
        env_.funcs[name] = f;
        eng_.register_func(f);
      }
      success();
      return true;
    }

    if (head == "assert") {
      if (cmd.size() != 2) fail_input("malformed assert");
      const Sexpr* body = &cmd[1];
      std::string name;
      if (body->is_list() && body->size() >= 2 && (*body)[0].is_atom &&
          (*body)[0].atom == "!") {
        for (size_t i = 2; i + 1 < body->size(); i += 2)
          if ((*body)[i].is_atom && (*body)[i].atom == ":named")
            name = atom_at(*body, i + 1, "assert");
        body = &(*body)[1];
      }
      Term f = parse_term(*body);
      if (eng_.tm().sort_of(f) != eng_.tm().bool_sort())
        fail_sort("asserted term is not boolean");
      eng_.assert_term(f, name);
      success();
      return true;
    }

    if (head == "push" || head == "pop") {
      size_t n = 1;
      if (cmd.size() > 1) n = std::stoul(atom_at(cmd, 1, head.c_str()));
      if (head == "push")
        for (size_t i = 0; i < n; i++) eng_.push();
      else
        eng_.pop(n);
      success();
      return true;
    }

    if (head == "check-sat") {
      switch (eng_.check_sat()) {
        case Verdict::Sat:
          reply("sat");
          break;
        case Verdict::Unsat:
          reply("unsat");
          break;
        case Verdict::Unknown:
          reply("unknown");
          break;
      }
      return true;
    }

    if (head == "get-model") {
      reply(eng_.model_text());
      return true;
    }

    if (head == "get-value") {
      if (cmd.size() != 2 || !cmd[1].is_list()) fail_input("malformed get-value");
      std::vector<Term> ts;
      for (const Sexpr& e : cmd[1].items) ts.push_back(parse_term(e));
      reply(eng_.values_text(ts));
      return true;
    }

    if (head == "get-unsat-core") {
      reply(eng_.core_text());
      return true;
    }

    if (head == "get-interpolants") {
      std::vector<Term> groups;
      for (size_t i = 1; i < cmd.size(); i++)
        groups.push_back(eng_.named_formula(atom_at(cmd, i, "get-interpolants")));
      std::vector<Term> itps = sequence_interpolants(eng_, groups);
      std::string s = "(";
      for (size_t i = 0; i < itps.size(); i++) {
        if (i) s += "\n ";
        s += print_term(eng_.tm(), itps[i], PrintStyle::Smt);
      }
      reply(s + ")");
      return true;
    }

    fail_input("unknown command '" + head + "'");
  }
};

}  // namespace qivc::fm
