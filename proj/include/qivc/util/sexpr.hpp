#pragma once

#include <cctype>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qivc {

// S-expression node. Atoms keep the source position so later phases can
// report errors in terms of the original file.
struct Sexpr {
  bool is_atom = false;
  std::string atom;
  std::vector<Sexpr> items;
  int line = 0;
  int col = 0;

  bool is_list() const { return !is_atom; }
  size_t size() const { return items.size(); }
  const Sexpr& operator[](size_t i) const { return items[i]; }
  bool head_is(std::string_view s) const {
    return is_list() && !items.empty() && items[0].is_atom && items[0].atom == s;
  }
};

class SexprError : public std::runtime_error {
 public:
  SexprError(const std::string& msg, int line, int col)
      : std::runtime_error(msg + " at line " + std::to_string(line) + ", column " +
                           std::to_string(col)),
        line(line),
        col(col) {}
  int line;
  int col;
};

class SexprReader {
 public:
  explicit SexprReader(std::string_view text) : text_(text) {}

  // Reads the next toplevel s-expression; returns false on end of input.
  bool next(Sexpr& out) {
    skip_ws();
    if (pos_ >= text_.size()) return false;
    out = read_expr();
    return true;
  }

  std::vector<Sexpr> read_all() {
    std::vector<Sexpr> out;
    Sexpr e;
    while (next(e)) out.push_back(std::move(e));
    return out;
  }

 private:
  std::string_view text_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;

  void advance() {
    if (pos_ < text_.size()) {
      if (text_[pos_] == '\n') {
        line_++;
        col_ = 1;
      } else {
        col_++;
      }
      pos_++;
    }
  }

  void skip_ws() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  Sexpr read_expr() {
    skip_ws();
    if (pos_ >= text_.size()) throw SexprError("unexpected end of input", line_, col_);
    int l = line_, c = col_;
    char ch = text_[pos_];
    if (ch == '(') {
      advance();
      Sexpr e;
      e.is_atom = false;
      e.line = l;
      e.col = c;
      for (;;) {
        skip_ws();
        if (pos_ >= text_.size()) throw SexprError("unbalanced '('", l, c);
        if (text_[pos_] == ')') {
          advance();
          return e;
        }
        e.items.push_back(read_expr());
      }
    }
    if (ch == ')') throw SexprError("unexpected ')'", l, c);
    if (ch == '|') {
      // quoted symbol
      advance();
      std::string sym;
      while (pos_ < text_.size() && text_[pos_] != '|') {
        sym.push_back(text_[pos_]);
        advance();
      }
      if (pos_ >= text_.size()) throw SexprError("unterminated quoted symbol", l, c);
      advance();
      Sexpr e;
      e.is_atom = true;
      e.atom = std::move(sym);
      e.line = l;
      e.col = c;
      return e;
    }
    if (ch == '"') {
      advance();
      std::string s = "\"";
      while (pos_ < text_.size()) {
        char d = text_[pos_];
        advance();
        if (d == '"') {
          if (pos_ < text_.size() && text_[pos_] == '"') {
            s.push_back('"');
            advance();
            continue;
          }
          break;
        }
        s.push_back(d);
      }
      s.push_back('"');
      Sexpr e;
      e.is_atom = true;
      e.atom = std::move(s);
      e.line = l;
      e.col = c;
      return e;
    }
    std::string sym;
    while (pos_ < text_.size()) {
      char d = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(d)) || d == '(' || d == ')' || d == ';')
        break;
      sym.push_back(d);
      advance();
    }
    Sexpr e;
    e.is_atom = true;
    e.atom = std::move(sym);
    e.line = l;
    e.col = c;
    return e;
  }
};

inline void write_sexpr(const Sexpr& e, std::string& out) {
  if (e.is_atom) {
    out += e.atom;
    return;
  }
  out.push_back('(');
  for (size_t i = 0; i < e.items.size(); i++) {
    if (i) out.push_back(' ');
    write_sexpr(e.items[i], out);
  }
  out.push_back(')');
}

inline std::string to_string(const Sexpr& e) {
  std::string s;
  write_sexpr(e, s);
  return s;
}

}  // namespace qivc
