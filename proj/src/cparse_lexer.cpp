#include "cparse_lexer.hpp"

#include <array>
#include <cctype>

#include "termeval/cparse.hpp"

namespace termeval::cparse::detail {

namespace {

constexpr std::array<std::string_view, 22> kMultiPunct = {
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==",
    "!=",  "&&",  "||",  "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  int line = 1;
  bool line_start = true;

  auto at = [&](std::size_t k) { return k < src.size() ? src[k] : '\0'; };

  while (i < src.size()) {
    char c = src[i];
    if (c == '\n') {
      ++line;
      ++i;
      line_start = true;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '/' && at(i + 1) == '/') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && at(i + 1) == '*') {
      int start = line;
      i += 2;
      while (true) {
        if (i >= src.size()) throw ParseError(start, "unterminated comment");
        if (src[i] == '*' && at(i + 1) == '/') {
          i += 2;
          break;
        }
        if (src[i] == '\n') ++line;
        ++i;
      }
      continue;
    }
    if (c == '#' && line_start) {
      int start = line;
      std::string text;
      while (i < src.size() && src[i] != '\n') {
        if (src[i] == '\\' && at(i + 1) == '\n') {
          text.push_back(' ');
          i += 2;
          ++line;
          continue;
        }
        text.push_back(src[i++]);
      }
      out.push_back({Tok::Directive, text, start});
      continue;
    }
    line_start = false;

    if (ident_start(c)) {
      std::size_t j = i;
      while (j < src.size() && ident_char(src[j])) ++j;
      out.push_back({Tok::Ident, std::string(src.substr(i, j - i)), line});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(at(i + 1))))) {
      std::size_t j = i;
      // Greedy pp-number: digits, letters, dots, and exponent signs.
      while (j < src.size()) {
        char d = src[j];
        if (ident_char(d) || d == '.') {
          ++j;
        } else if ((d == '+' || d == '-') && j > i &&
                   (src[j - 1] == 'e' || src[j - 1] == 'E' || src[j - 1] == 'p' ||
                    src[j - 1] == 'P')) {
          ++j;
        } else {
          break;
        }
      }
      out.push_back({Tok::Number, std::string(src.substr(i, j - i)), line});
      i = j;
      continue;
    }
    if (c == '\'' || c == '"') {
      char quote = c;
      std::size_t j = i + 1;
      while (true) {
        if (j >= src.size() || src[j] == '\n') {
          throw ParseError(line, quote == '"' ? "unterminated string literal"
                                              : "unterminated character literal");
        }
        if (src[j] == '\\') {
          j += 2;
          continue;
        }
        if (src[j] == quote) break;
        ++j;
      }
      out.push_back({quote == '"' ? Tok::String : Tok::Char,
                     std::string(src.substr(i, j + 1 - i)), line});
      i = j + 1;
      continue;
    }
    bool matched = false;
    for (std::string_view p : kMultiPunct) {
      if (src.substr(i, p.size()) == p) {
        out.push_back({Tok::Punct, std::string(p), line});
        i += p.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    out.push_back({Tok::Punct, std::string(1, c), line});
    ++i;
  }
  out.push_back({Tok::End, "", line});
  return out;
}

}  // namespace termeval::cparse::detail
