#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace termeval::cparse::detail {

enum class Tok { Ident, Number, Char, String, Punct, Directive, End };

struct Token {
  Tok kind;
  std::string text;
  int line;
};

/// Tokenize C source. Comments are dropped, preprocessor lines become a
/// single Directive token. Throws ParseError on unterminated comments or
/// literals.
std::vector<Token> lex(std::string_view src);

}  // namespace termeval::cparse::detail
