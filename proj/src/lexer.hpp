#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "deeplog/value.hpp"

namespace deeplog {

// Token stream shared by the model-file and logic-program parsers.
// Line comments start with '%'.

enum class Tok {
  Ident,     // lowercase-initial identifier (may contain ':' as in fuzzy:godel)
  Var,       // uppercase-initial identifier
  Int,
  Float,
  Punct,     // single char: . , ( ) [ ] { } < > = + * / - @ : | ; !
  ColonDash, // :-
  ColonColon,// ::
  Define,    // :=
  DotDot,    // ..
  Power,     // **
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  long long int_value = 0;
  double float_value = 0;
  int line = 1;
  int column = 1;
};

struct LexError {
  std::string message;
  int line;
  int column;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : src_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_ws();
      Token t;
      t.line = line_;
      t.column = col_;
      if (eof()) {
        t.kind = Tok::End;
        out.push_back(t);
        break;
      }
      char c = peek();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::string s;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_'))
          s.push_back(get());
        // structure ids like fuzzy:godel read as one identifier
        if (s == "fuzzy" && !eof() && peek() == ':' && pos_ + 1 < src_.size() &&
            std::isalpha(static_cast<unsigned char>(src_[pos_ + 1]))) {
          s.push_back(get());
          while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_'))
            s.push_back(get());
        }
        t.kind = (std::isupper(static_cast<unsigned char>(s[0])) || s[0] == '_') ? Tok::Var
                                                                                 : Tok::Ident;
        t.text = s;
        out.push_back(t);
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c))) {
        out.push_back(lex_number());
        continue;
      }
      // two-char tokens
      if (c == ':' && look(1) == '-') { t.kind = Tok::ColonDash; t.text = ":-"; pos_ += 2; col_ += 2; out.push_back(t); continue; }
      if (c == ':' && look(1) == ':') { t.kind = Tok::ColonColon; t.text = "::"; pos_ += 2; col_ += 2; out.push_back(t); continue; }
      if (c == ':' && look(1) == '=') { t.kind = Tok::Define; t.text = ":="; pos_ += 2; col_ += 2; out.push_back(t); continue; }
      if (c == '.' && look(1) == '.') { t.kind = Tok::DotDot; t.text = ".."; pos_ += 2; col_ += 2; out.push_back(t); continue; }
      if (c == '*' && look(1) == '*') { t.kind = Tok::Power; t.text = "**"; pos_ += 2; col_ += 2; out.push_back(t); continue; }
      t.kind = Tok::Punct;
      t.text = std::string(1, get());
      out.push_back(t);
    }
    return out;
  }

 private:
  Token lex_number() {
    Token t;
    t.line = line_;
    t.column = col_;
    std::string s;
    while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) s.push_back(get());
    bool is_float = false;
    if (!eof() && peek() == '.' && look(1) != '.' &&
        std::isdigit(static_cast<unsigned char>(look(1)))) {
      is_float = true;
      s.push_back(get());
      while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) s.push_back(get());
    }
    if (!eof() && (peek() == 'e' || peek() == 'E')) {
      std::size_t save = pos_;
      int save_col = col_;
      std::string ex(1, get());
      if (!eof() && (peek() == '+' || peek() == '-')) ex.push_back(get());
      if (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) {
        while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) ex.push_back(get());
        s += ex;
        is_float = true;
      } else {
        pos_ = save;
        col_ = save_col;
      }
    }
    t.text = s;
    if (is_float) {
      t.kind = Tok::Float;
      t.float_value = std::stod(s);
    } else {
      t.kind = Tok::Int;
      t.int_value = std::stoll(s);
      t.float_value = static_cast<double>(t.int_value);
    }
    return t;
  }

  void skip_ws() {
    while (!eof()) {
      char c = peek();
      if (c == '%') {
        while (!eof() && peek() != '\n') get();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        get();
      } else {
        break;
      }
    }
  }

  bool eof() const { return pos_ >= src_.size(); }
  char peek() const { return src_[pos_]; }
  char look(std::size_t k) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }
  char get() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

struct ParseError {
  std::string message;
  int line;
  int column;
};

// Cursor over a token vector with common expect/accept helpers.
class TokenCursor {
 public:
  explicit TokenCursor(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token& peek(std::size_t k = 0) const {
    std::size_t i = pos_ + k;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  const Token& get() {
    const Token& t = peek();
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == Tok::End; }

  bool accept_punct(char c) {
    if (peek().kind == Tok::Punct && peek().text[0] == c) {
      get();
      return true;
    }
    return false;
  }
  bool accept(Tok k) {
    if (peek().kind == k) {
      get();
      return true;
    }
    return false;
  }
  bool accept_ident(const std::string& s) {
    if (peek().kind == Tok::Ident && peek().text == s) {
      get();
      return true;
    }
    return false;
  }
  void expect_punct(char c, const std::string& what) {
    if (!accept_punct(c)) error("expected '" + std::string(1, c) + "' " + what);
  }
  Token expect(Tok k, const std::string& what) {
    if (peek().kind != k) error("expected " + what);
    return get();
  }
  [[noreturn]] void error(const std::string& msg) const {
    throw ParseError{msg + " (found '" + peek().text + "')", peek().line, peek().column};
  }
  double number(const std::string& what) {
    bool neg = false;
    if (peek().kind == Tok::Punct && peek().text == "-") {
      get();
      neg = true;
    }
    if (peek().kind != Tok::Int && peek().kind != Tok::Float) error("expected number " + what);
    double v = get().float_value;
    return neg ? -v : v;
  }

  // Recover to just after the next '.' statement terminator.
  void sync_statement() {
    while (!at_end()) {
      const Token& t = get();
      if (t.kind == Tok::Punct && t.text == ".") return;
    }
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace deeplog
