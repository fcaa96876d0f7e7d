#include "termeval/cparse.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>
#include <unordered_map>

#include "cparse_lexer.hpp"
#include "termeval/text.hpp"

namespace termeval::cparse {

namespace {

using detail::Tok;
using detail::Token;

struct Unsupported {
  int line;
  std::string what;
};

struct TypeSpec {
  IntType type = cint::kInt;
  bool is_void = false;
  bool is_typedef = false;
  bool is_static = false;
};

const std::unordered_map<std::string, IntType>& nondet_types() {
  static const std::unordered_map<std::string, IntType> m = {
      {"int", cint::kInt},     {"uint", cint::kUInt},     {"unsigned", cint::kUInt},
      {"char", cint::kChar},   {"uchar", cint::kUChar},   {"short", cint::kShort},
      {"ushort", cint::kUShort}, {"long", cint::kLong},   {"ulong", cint::kULong},
      {"longlong", cint::kLong}, {"ulonglong", cint::kULong}, {"bool", cint::kBool},
      {"_Bool", cint::kBool},
  };
  return m;
}

const std::set<std::string>& halt_functions() {
  static const std::set<std::string> s = {"abort", "exit", "reach_error", "__VERIFIER_error",
                                          "__assert_fail", "_Exit"};
  return s;
}

const std::set<std::string>& unsupported_type_words() {
  static const std::set<std::string> s = {"struct", "union", "float", "double", "_Complex"};
  return s;
}

const std::set<std::string>& unsupported_statement_words() {
  static const std::set<std::string> s = {"goto", "switch", "case", "default", "asm", "__asm__"};
  return s;
}

const std::set<std::string>& heap_functions() {
  static const std::set<std::string> s = {"malloc", "calloc", "realloc", "free", "alloca",
                                          "__builtin_alloca"};
  return s;
}

struct FunctionSig {
  IntType ret;
  bool returns_void = false;
  std::vector<IntType> params;
  bool defined = false;
  int first_use_line = 0;
};

ExprPtr make_expr(decltype(Expr::node) node, IntType type, int line) {
  auto e = std::make_shared<Expr>();
  e->node = std::move(node);
  e->type = type;
  e->line = line;
  return e;
}

IntType binary_type(BinOp op, const Expr& l, const Expr& r) {
  if (cint::is_comparison(op) || op == BinOp::LogAnd || op == BinOp::LogOr) return cint::kInt;
  if (op == BinOp::Shl || op == BinOp::Shr) return cint::promote(l.type);
  return cint::common_type(cint::promote(l.type), cint::promote(r.type));
}

ExprPtr make_binary(BinOp op, ExprPtr l, ExprPtr r, int line) {
  IntType t = binary_type(op, *l, *r);
  return make_expr(Binary{op, std::move(l), std::move(r)}, t, line);
}

ExprPtr make_unary(UnOp op, ExprPtr e, int line) {
  IntType t = op == UnOp::LogNot ? cint::kInt : cint::promote(e->type);
  return make_expr(Unary{op, std::move(e)}, t, line);
}

bool contains_call(const Expr& e) {
  return std::visit(
      [](const auto& n) -> bool {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, Call>) {
          return true;
        } else if constexpr (std::is_same_v<N, Unary> || std::is_same_v<N, Cast>) {
          return contains_call(*n.operand);
        } else if constexpr (std::is_same_v<N, Binary>) {
          return contains_call(*n.lhs) || contains_call(*n.rhs);
        } else {
          return false;
        }
      },
      e.node);
}

bool contains_side_effect(const Expr& e) {
  return std::visit(
      [](const auto& n) -> bool {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, Call> || std::is_same_v<N, Nondet>) {
          return true;
        } else if constexpr (std::is_same_v<N, Unary> || std::is_same_v<N, Cast>) {
          return contains_side_effect(*n.operand);
        } else if constexpr (std::is_same_v<N, Binary>) {
          return contains_side_effect(*n.lhs) || contains_side_effect(*n.rhs);
        } else {
          return false;
        }
      },
      e.node);
}

// Calls are hoisted out of expressions before evaluation, which is only
// sound when the call is unconditionally evaluated.
void check_no_conditional_calls(const Expr& e) {
  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, Unary> || std::is_same_v<N, Cast>) {
          check_no_conditional_calls(*n.operand);
        } else if constexpr (std::is_same_v<N, Binary>) {
          if ((n.op == BinOp::LogAnd || n.op == BinOp::LogOr) && contains_call(*n.rhs)) {
            throw Unsupported{e.line, "function call under short-circuit operator"};
          }
          check_no_conditional_calls(*n.lhs);
          check_no_conditional_calls(*n.rhs);
        } else if constexpr (std::is_same_v<N, Call>) {
          for (const auto& a : n.args) check_no_conditional_calls(*a);
        }
      },
      e.node);
}

std::optional<cint::Value> parse_int_literal(const std::string& text) {
  std::string digits = text;
  bool is_unsigned = false;
  int longs = 0;
  while (!digits.empty()) {
    char c = digits.back();
    if (c == 'u' || c == 'U') {
      is_unsigned = true;
    } else if (c == 'l' || c == 'L') {
      ++longs;
    } else {
      break;
    }
    digits.pop_back();
  }
  int base = 10;
  std::size_t start = 0;
  if (digits.size() > 1 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'X')) {
    base = 16;
    start = 2;
  } else if (digits.size() > 1 && digits[0] == '0') {
    base = 8;
    start = 1;
  }
  if (start >= digits.size()) {
    if (digits == "0") return cint::Value{0, cint::kInt};
    return std::nullopt;
  }
  std::uint64_t mag = 0;
  const char* first = digits.data() + start;
  const char* last = digits.data() + digits.size();
  auto [ptr, ec] = std::from_chars(first, last, mag, base);
  if (ec != std::errc() || ptr != last) return std::nullopt;

  std::vector<IntType> candidates;
  bool decimal = base == 10;
  if (is_unsigned) {
    if (longs == 0) candidates.push_back(cint::kUInt);
    candidates.push_back(cint::kULong);
  } else {
    if (longs == 0) {
      candidates.push_back(cint::kInt);
      if (!decimal) candidates.push_back(cint::kUInt);
    }
    candidates.push_back(cint::kLong);
    if (!decimal) candidates.push_back(cint::kULong);
  }
  for (IntType t : candidates) {
    if (mag <= cint::max_value(t)) return cint::make(static_cast<std::int64_t>(mag), t);
  }
  return std::nullopt;
}

std::optional<std::int64_t> parse_char_literal(const std::string& text) {
  // text includes the quotes
  std::string body = text.substr(1, text.size() - 2);
  if (body.empty()) return std::nullopt;
  if (body[0] != '\\') {
    if (body.size() != 1) return std::nullopt;
    return static_cast<signed char>(body[0]);
  }
  if (body.size() < 2) return std::nullopt;
  char e = body[1];
  switch (e) {
    case 'n': return '\n';
    case 't': return '\t';
    case 'r': return '\r';
    case '0':
    case '1': case '2': case '3': case '4': case '5': case '6': case '7': {
      int v = 0;
      for (std::size_t k = 1; k < body.size() && k < 4; ++k) {
        if (body[k] < '0' || body[k] > '7') return std::nullopt;
        v = v * 8 + (body[k] - '0');
      }
      return static_cast<signed char>(v);
    }
    case 'x': {
      int v = 0;
      auto [p, ec] = std::from_chars(body.data() + 2, body.data() + body.size(), v, 16);
      if (ec != std::errc()) return std::nullopt;
      return static_cast<signed char>(v);
    }
    case '\\': return '\\';
    case '\'': return '\'';
    case '"': return '"';
    case 'a': return '\a';
    case 'b': return '\b';
    case 'f': return '\f';
    case 'v': return '\v';
    default: return std::nullopt;
  }
}

class Parser {
 public:
  Parser(std::vector<Token> toks, Program& prog) : toks_(std::move(toks)), prog_(prog) {}

  void parse_translation_unit() {
    while (peek().kind != Tok::End) parse_external();
    for (const auto& [name, sig] : sigs_) {
      if (!sig.defined && sig.first_use_line > 0) {
        throw Unsupported{sig.first_use_line, "call to undefined function " + name};
      }
    }
    if (!prog_.functions.count("main")) throw ParseError(last_line(), "no main function");
  }

  ExprPtr parse_standalone_expression(const FunctionDef* fn, int line) {
    lookup_fn_ = fn;
    lookup_line_ = line;
    standalone_ = true;
    ExprPtr e = parse_expr();
    return e;
  }

  bool at_end() const { return toks_[pos_].kind == Tok::End; }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Program& prog_;

  std::unordered_map<std::string, IntType> typedefs_;
  std::unordered_map<std::string, std::int64_t> enum_consts_;
  std::map<std::string, FunctionSig> sigs_;
  std::unordered_map<std::string, VarRef> globals_;
  std::vector<std::unordered_map<std::string, VarRef>> scopes_;
  FunctionDef* fn_ = nullptr;
  int loop_depth_ = 0;

  // standalone expression mode
  bool standalone_ = false;
  const FunctionDef* lookup_fn_ = nullptr;
  int lookup_line_ = 0;

  const Token& peek(std::size_t k = 0) const {
    std::size_t i = std::min(pos_ + k, toks_.size() - 1);
    return toks_[i];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool is(std::string_view text, std::size_t k = 0) const {
    const Token& t = peek(k);
    return (t.kind == Tok::Punct || t.kind == Tok::Ident) && t.text == text;
  }
  bool accept(std::string_view text) {
    if (is(text)) {
      next();
      return true;
    }
    return false;
  }
  const Token& expect(std::string_view text) {
    if (!is(text)) {
      throw ParseError(peek().line, "expected '" + std::string(text) + "' near '" + peek().text + "'");
    }
    return next();
  }
  std::string expect_ident() {
    if (peek().kind != Tok::Ident) {
      throw ParseError(peek().line, "expected identifier near '" + peek().text + "'");
    }
    return next().text;
  }
  int last_line() const { return toks_.back().line; }

  // ---- types ---------------------------------------------------------

  bool starts_type(std::size_t k = 0) const {
    const Token& t = peek(k);
    if (t.kind != Tok::Ident) return false;
    static const std::set<std::string> words = {
        "void",  "char",     "short",  "int",    "long",   "signed",   "unsigned",
        "_Bool", "const",    "volatile", "static", "extern", "register", "auto",
        "inline", "typedef", "enum",   "struct", "union",  "float",    "double",
        "__inline", "__extension__", "_Complex", "restrict"};
    return words.count(t.text) || typedefs_.count(t.text);
  }

  TypeSpec parse_type_spec() {
    TypeSpec spec;
    int line = peek().line;
    int longs = 0, shorts = 0, chars = 0, ints = 0, bools = 0;
    bool is_unsigned = false, is_signed = false, saw_void = false;
    std::optional<IntType> named;
    bool any = false;
    while (true) {
      const Token& t = peek();
      if (t.kind != Tok::Ident) break;
      const std::string& w = t.text;
      if (unsupported_type_words().count(w)) throw Unsupported{t.line, w};
      if (w == "const" || w == "volatile" || w == "register" || w == "auto" || w == "inline" ||
          w == "__inline" || w == "__extension__" || w == "restrict" || w == "extern") {
        next();
      } else if (w == "static") {
        spec.is_static = true;
        next();
      } else if (w == "typedef") {
        spec.is_typedef = true;
        next();
      } else if (w == "void") {
        saw_void = true;
        next();
      } else if (w == "char") {
        ++chars;
        next();
      } else if (w == "short") {
        ++shorts;
        next();
      } else if (w == "int") {
        ++ints;
        next();
      } else if (w == "long") {
        ++longs;
        next();
      } else if (w == "signed") {
        is_signed = true;
        next();
      } else if (w == "unsigned") {
        is_unsigned = true;
        next();
      } else if (w == "_Bool") {
        ++bools;
        next();
      } else if (w == "enum") {
        next();
        parse_enum_body();
        named = cint::kInt;
      } else if (typedefs_.count(w) && !named && !any_base(longs, shorts, chars, ints, bools) &&
                 !is_unsigned && !is_signed && !saw_void) {
        named = typedefs_.at(w);
        next();
      } else {
        break;
      }
      any = true;
    }
    if (!any) throw ParseError(line, "expected type");
    if (saw_void) {
      spec.is_void = true;
      return spec;
    }
    if (named) {
      spec.type = *named;
      return spec;
    }
    IntType t = cint::kInt;
    if (bools) t = cint::kBool;
    else if (chars) t = cint::kChar;
    else if (shorts) t = cint::kShort;
    else if (longs) t = cint::kLong;
    if (is_unsigned && t.width > 1) t.is_signed = false;
    spec.type = t;
    return spec;
  }

  static bool any_base(int a, int b, int c, int d, int e) { return a + b + c + d + e > 0; }

  void parse_enum_body() {
    if (peek().kind == Tok::Ident && !is("{")) next();  // tag
    if (!accept("{")) return;
    std::int64_t value = 0;
    while (!is("}")) {
      int line = peek().line;
      std::string name = expect_ident();
      if (accept("=")) {
        ExprPtr e = parse_conditional();
        auto v = const_eval(*e);
        if (!v) throw Unsupported{line, "non-constant enumerator"};
        value = v->bits;
      }
      enum_consts_[name] = value++;
      if (!accept(",")) break;
    }
    expect("}");
  }

  // ---- top level -------------------------------------------------------

  void parse_external() {
    const Token& t = peek();
    if (t.kind == Tok::Directive) {
      std::string d = t.text;
      std::size_t k = 1;
      while (k < d.size() && std::isspace(static_cast<unsigned char>(d[k]))) ++k;
      if (d.compare(k, 7, "include") == 0 || d.compare(k, 4, "line") == 0 ||
          d.compare(k, 6, "pragma") == 0 || k >= d.size()) {
        next();
        return;
      }
      throw Unsupported{t.line, "preprocessor directive"};
    }
    if (accept(";")) return;
    if (!starts_type()) {
      if (t.kind == Tok::Ident && (is("(", 1))) {
        throw Unsupported{t.line, "implicit-int function definition"};
      }
      throw ParseError(t.line, "unexpected '" + t.text + "' at top level");
    }
    TypeSpec spec = parse_type_spec();
    if (accept(";")) return;  // enum definition or bare type
    if (spec.is_typedef) {
      while (true) {
        if (is("*")) throw Unsupported{peek().line, "pointer"};
        if (is("(")) throw Unsupported{peek().line, "function pointer"};
        std::string name = expect_ident();
        if (is("[")) throw Unsupported{peek().line, "array"};
        if (spec.is_void) throw Unsupported{peek().line, "void typedef"};
        typedefs_[name] = spec.type;
        if (!accept(",")) break;
      }
      expect(";");
      return;
    }
    bool first = true;
    while (true) {
      if (is("*")) throw Unsupported{peek().line, "pointer"};
      if (is("(")) throw Unsupported{peek().line, "function pointer"};
      int line = peek().line;
      std::string name = expect_ident();
      if (first && is("(")) {
        parse_function(spec, name, line);
        return;
      }
      first = false;
      if (is("[")) throw Unsupported{peek().line, "array"};
      if (spec.is_void) throw ParseError(line, "void variable");
      if (globals_.count(name)) {
        // tentative definitions / extern declarations of the same object
        if (accept("=")) {
          throw Unsupported{line, "redefinition of global " + name};
        }
      } else {
        VarRef ref{name, true, static_cast<int>(prog_.globals.size()), spec.type};
        GlobalVar g{ref, nullptr, line};
        if (accept("=")) {
          ExprPtr init = parse_assignment_rhs();
          if (contains_side_effect(*init)) throw Unsupported{line, "non-constant global initializer"};
          g.init = init;
        }
        globals_[name] = ref;
        prog_.globals.push_back(g);
      }
      if (!accept(",")) break;
    }
    expect(";");
  }

  void parse_function(const TypeSpec& spec, const std::string& name, int line) {
    expect("(");
    std::vector<std::pair<std::string, std::pair<IntType, int>>> params;
    if (is("void") && is(")", 1)) {
      next();
    } else if (!is(")")) {
      while (true) {
        if (is("...")) throw Unsupported{peek().line, "variadic function"};
        int pline = peek().line;
        TypeSpec ps = parse_type_spec();
        if (is("*")) throw Unsupported{peek().line, "pointer"};
        if (is("(")) throw Unsupported{peek().line, "function pointer"};
        if (ps.is_void) throw Unsupported{pline, "void parameter"};
        std::string pname;
        if (peek().kind == Tok::Ident) {
          pline = peek().line;
          pname = next().text;
        }
        if (is("[")) throw Unsupported{peek().line, "array"};
        params.push_back({pname, {ps.type, pline}});
        if (!accept(",")) break;
      }
    }
    expect(")");

    FunctionSig sig;
    sig.ret = spec.is_void ? cint::kInt : spec.type;
    sig.returns_void = spec.is_void;
    for (auto& p : params) sig.params.push_back(p.second.first);
    auto it = sigs_.find(name);
    if (it != sigs_.end()) {
      if (it->second.params != sig.params || it->second.returns_void != sig.returns_void ||
          (!sig.returns_void && !(it->second.ret == sig.ret))) {
        throw ParseError(line, "conflicting declaration of " + name);
      }
    } else {
      sigs_[name] = sig;
    }

    if (accept(";")) return;  // prototype
    if (!is("{")) throw ParseError(peek().line, "expected function body");
    if (sigs_[name].defined) throw ParseError(line, "redefinition of " + name);
    sigs_[name].defined = true;

    FunctionDef fn;
    fn.name = name;
    fn.return_type = sig.ret;
    fn.returns_void = sig.returns_void;
    fn.line = line;
    fn_ = &fn;
    scopes_.clear();
    scopes_.emplace_back();
    for (auto& [pname, info] : params) {
      if (pname.empty()) throw ParseError(info.second, "unnamed parameter in definition");
      VarRef r = declare_local(pname, info.first, info.second);
      fn.params.push_back(r);
    }
    int open_line = expect("{").line;
    (void)open_line;
    scopes_.emplace_back();
    while (!is("}")) {
      if (peek().kind == Tok::End) throw ParseError(last_line(), "unexpected end of input");
      parse_statement_into(fn.body);
    }
    fn.close_line = expect("}").line;
    scopes_.clear();
    fn_ = nullptr;
    fn.num_slots = static_cast<int>(fn.locals.size());
    prog_.functions[name] = std::move(fn);
  }

  VarRef declare_local(const std::string& name, IntType type, int line) {
    auto& scope = scopes_.back();
    if (scope.count(name)) throw ParseError(line, "redeclaration of " + name);
    VarRef r{name, false, static_cast<int>(fn_->locals.size()), type};
    fn_->locals.push_back(r);
    fn_->local_lines.push_back(line);
    scope[name] = r;
    return r;
  }

  std::optional<VarRef> lookup_var(const std::string& name) const {
    if (standalone_) {
      if (lookup_fn_) {
        std::optional<VarRef> best;
        int best_line = -1;
        for (std::size_t s = 0; s < lookup_fn_->locals.size(); ++s) {
          const VarRef& r = lookup_fn_->locals[s];
          int dl = lookup_fn_->local_lines[s];
          if (r.name == name && dl <= lookup_line_ && dl >= best_line) {
            best = r;
            best_line = dl;
          }
        }
        if (best) return best;
      }
      for (const auto& g : prog_.globals) {
        if (g.var.name == name) return g.var;
      }
      return std::nullopt;
    }
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return f->second;
    }
    auto g = globals_.find(name);
    if (g != globals_.end()) return g->second;
    return std::nullopt;
  }

  // ---- statements ------------------------------------------------------

  Stmt parse_body_statement() {
    StmtList tmp;
    parse_statement_into(tmp);
    if (tmp.size() == 1) return std::move(tmp[0]);
    // a declaration with several declarators as a loop body
    Stmt s;
    s.line = tmp.empty() ? peek().line : tmp.front().line;
    s.node = Block{std::move(tmp), 0};
    return s;
  }

  void parse_statement_into(StmtList& out) {
    const Token& t = peek();
    int line = t.line;
    if (t.kind == Tok::Directive) throw Unsupported{line, "preprocessor directive"};
    if (t.kind == Tok::End) throw ParseError(line, "unexpected end of input");

    if (is("{")) {
      next();
      scopes_.emplace_back();
      Block b;
      while (!is("}")) {
        if (peek().kind == Tok::End) throw ParseError(last_line(), "unexpected end of input");
        parse_statement_into(b.body);
      }
      b.close_line = expect("}").line;
      scopes_.pop_back();
      out.push_back(Stmt{line, std::move(b)});
      return;
    }
    if (accept(";")) {
      out.push_back(Stmt{line, Block{{}, line}});
      return;
    }
    if (t.kind == Tok::Ident) {
      if (unsupported_statement_words().count(t.text)) throw Unsupported{line, t.text};
      if (is(":", 1)) throw Unsupported{line, "label"};
      if (t.text == "if") return parse_if(out);
      if (t.text == "while") return parse_while(out);
      if (t.text == "do") return parse_do(out);
      if (t.text == "for") return parse_for(out);
      if (t.text == "return") {
        next();
        Return r;
        if (!is(";")) r.value = parse_expr();
        if (r.value && fn_->returns_void) throw ParseError(line, "return value in void function");
        if (r.value) check_no_conditional_calls(*r.value);
        expect(";");
        out.push_back(Stmt{line, std::move(r)});
        return;
      }
      if (t.text == "break" || t.text == "continue") {
        if (loop_depth_ == 0) throw ParseError(line, t.text + " outside loop");
        bool brk = t.text == "break";
        next();
        expect(";");
        if (brk) out.push_back(Stmt{line, Break{}});
        else out.push_back(Stmt{line, Continue{}});
        return;
      }
      if (starts_type()) {
        parse_local_declaration(out, /*in_for=*/false);
        return;
      }
    }
    parse_simple_statement(out, /*terminator=*/";");
    expect(";");
  }

  void parse_if(StmtList& out) {
    int line = next().line;
    expect("(");
    If s;
    s.cond = parse_expr();
    check_no_conditional_calls(*s.cond);
    expect(")");
    s.then_body.push_back(parse_body_statement());
    if (is("else")) {
      s.else_line = next().line;
      s.has_else = true;
      s.else_body.push_back(parse_body_statement());
    }
    out.push_back(Stmt{line, std::move(s)});
  }

  void parse_while(StmtList& out) {
    int line = next().line;
    expect("(");
    While s;
    s.cond = parse_expr();
    check_no_conditional_calls(*s.cond);
    expect(")");
    ++loop_depth_;
    s.body.push_back(parse_body_statement());
    --loop_depth_;
    out.push_back(Stmt{line, std::move(s)});
  }

  void parse_do(StmtList& out) {
    int line = next().line;
    DoWhile s;
    ++loop_depth_;
    s.body.push_back(parse_body_statement());
    --loop_depth_;
    s.cond_line = expect("while").line;
    expect("(");
    s.cond = parse_expr();
    check_no_conditional_calls(*s.cond);
    expect(")");
    expect(";");
    out.push_back(Stmt{line, std::move(s)});
  }

  void parse_for(StmtList& out) {
    int line = next().line;
    expect("(");
    scopes_.emplace_back();
    For s;
    if (!is(";")) {
      if (starts_type()) {
        parse_local_declaration(s.init, /*in_for=*/true);
      } else {
        parse_simple_statement(s.init, ";");
        while (accept(",")) parse_simple_statement(s.init, ";");
      }
    }
    expect(";");
    if (!is(";")) {
      s.cond = parse_expr();
      check_no_conditional_calls(*s.cond);
    }
    expect(";");
    if (!is(")")) {
      parse_simple_statement(s.step, ")");
      while (accept(",")) parse_simple_statement(s.step, ")");
    }
    expect(")");
    ++loop_depth_;
    s.body.push_back(parse_body_statement());
    --loop_depth_;
    scopes_.pop_back();
    out.push_back(Stmt{line, std::move(s)});
  }

  void parse_local_declaration(StmtList& out, bool in_for) {
    int line = peek().line;
    TypeSpec spec = parse_type_spec();
    if (spec.is_typedef) throw Unsupported{line, "local typedef"};
    if (spec.is_static) throw Unsupported{line, "static local"};
    if (accept(";")) return;
    if (spec.is_void) throw ParseError(line, "void variable");
    while (true) {
      if (is("*")) throw Unsupported{peek().line, "pointer"};
      if (is("(")) throw Unsupported{peek().line, "function pointer"};
      int dline = peek().line;
      std::string name = expect_ident();
      if (is("[")) throw Unsupported{peek().line, "array"};
      if (is("(")) throw Unsupported{dline, "local function declaration"};
      ExprPtr init;
      if (accept("=")) init = parse_assignment_rhs();
      // The variable is in scope only after its declarator.
      VarRef r = declare_local(name, spec.type, dline);
      if (init) check_no_conditional_calls(*init);
      if (init && std::holds_alternative<Nondet>(init->node)) {
        const auto& nd = std::get<Nondet>(init->node);
        rename_site(nd.site, name);
        out.push_back(Stmt{dline, NondetAssign{r, nd.type, nd.func, nd.site, true}});
      } else {
        out.push_back(Stmt{dline, Decl{r, init}});
      }
      if (!accept(",")) break;
    }
    if (!in_for) expect(";");
  }

  void rename_site(int site, const std::string& var) {
    prog_.nondet_vars[static_cast<std::size_t>(site)].variable = var;
  }

  VarRef lvalue(const std::string& name, int line) {
    if (enum_consts_.count(name)) throw ParseError(line, "assignment to enumerator " + name);
    auto r = lookup_var(name);
    if (!r) throw ParseError(line, "undeclared identifier " + name);
    return *r;
  }

  // assignment, ++/--, call, or plain expression (no trailing ';')
  void parse_simple_statement(StmtList& out, std::string_view /*terminator*/) {
    int line = peek().line;
    // prefix ++/--
    if (is("++") || is("--")) {
      bool inc = next().text == "++";
      int vline = peek().line;
      std::string name = expect_ident();
      VarRef v = lvalue(name, vline);
      out.push_back(Stmt{line, make_step(v, inc, inc ? "++" : "--", line)});
      return;
    }
    if (peek().kind == Tok::Ident && !is("(", 1) && !starts_type()) {
      const std::string& op = peek(1).text;
      static const std::set<std::string> assign_ops = {"=",  "+=", "-=", "*=",  "/=", "%=",
                                                       "&=", "|=", "^=", "<<=", ">>="};
      if (peek(1).kind == Tok::Punct && (assign_ops.count(op) || op == "++" || op == "--")) {
        std::string name = next().text;
        VarRef v = lvalue(name, line);
        std::string aop = next().text;
        if (aop == "++" || aop == "--") {
          out.push_back(Stmt{line, make_step(v, aop == "++", aop, line)});
          return;
        }
        ExprPtr rhs = parse_assignment_rhs();
        check_no_conditional_calls(*rhs);
        if (aop == "=") {
          if (std::holds_alternative<Nondet>(rhs->node)) {
            const auto& nd = std::get<Nondet>(rhs->node);
            rename_site(nd.site, name);
            out.push_back(Stmt{line, NondetAssign{v, nd.type, nd.func, nd.site, false}});
            return;
          }
          out.push_back(Stmt{line, Assign{v, rhs, "="}});
          return;
        }
        BinOp bop = compound_op(aop);
        ExprPtr cur = make_expr(Var{v}, v.type, line);
        out.push_back(Stmt{line, Assign{v, make_binary(bop, cur, rhs, line), aop}});
        return;
      }
    }
    if (peek().kind == Tok::Ident && is("(", 1)) {
      const std::string& name = peek().text;
      if (name == "__VERIFIER_assume") {
        next();
        expect("(");
        ExprPtr c = parse_expr();
        check_no_conditional_calls(*c);
        expect(")");
        out.push_back(Stmt{line, Assume{c}});
        return;
      }
      if (halt_functions().count(name) && !(sigs_.count(name) && sigs_.at(name).defined)) {
        next();
        skip_balanced_parens();
        out.push_back(Stmt{line, Halt{name}});
        return;
      }
    }
    ExprPtr e = parse_expr();
    if (is("=") || is("++") || is("--")) throw Unsupported{line, "assignment to non-variable"};
    check_no_conditional_calls(*e);
    out.push_back(Stmt{line, ExprStmt{e}});
  }

  Assign make_step(const VarRef& v, bool inc, const std::string& op, int line) {
    ExprPtr cur = make_expr(Var{v}, v.type, line);
    ExprPtr one = make_expr(IntLit{cint::Value{1, cint::kInt}, "1"}, cint::kInt, line);
    return Assign{v, make_binary(inc ? BinOp::Add : BinOp::Sub, cur, one, line), op};
  }

  static BinOp compound_op(const std::string& aop) {
    std::string base = aop.substr(0, aop.size() - 1);
    static const std::unordered_map<std::string, BinOp> m = {
        {"+", BinOp::Add},    {"-", BinOp::Sub},    {"*", BinOp::Mul},     {"/", BinOp::Div},
        {"%", BinOp::Rem},    {"&", BinOp::BitAnd}, {"|", BinOp::BitOr},   {"^", BinOp::BitXor},
        {"<<", BinOp::Shl},   {">>", BinOp::Shr}};
    return m.at(base);
  }

  void skip_balanced_parens() {
    expect("(");
    int depth = 1;
    while (depth > 0) {
      const Token& t = next();
      if (t.kind == Tok::End) throw ParseError(t.line, "unbalanced parentheses");
      if (t.kind == Tok::Punct && t.text == "(") ++depth;
      if (t.kind == Tok::Punct && t.text == ")") --depth;
    }
  }

  // ---- expressions -----------------------------------------------------

  ExprPtr parse_assignment_rhs() {
    ExprPtr e = parse_expr();
    if (is("=")) throw Unsupported{peek().line, "chained assignment"};
    return e;
  }

  ExprPtr parse_expr() { return parse_conditional(); }

  ExprPtr parse_conditional() {
    ExprPtr e = parse_binary(0);
    if (is("?")) throw Unsupported{peek().line, "conditional operator"};
    return e;
  }

  static int precedence(const Token& t, BinOp* op) {
    if (t.kind != Tok::Punct) return -1;
    static const std::unordered_map<std::string, std::pair<int, BinOp>> m = {
        {"||", {1, BinOp::LogOr}},  {"&&", {2, BinOp::LogAnd}}, {"|", {3, BinOp::BitOr}},
        {"^", {4, BinOp::BitXor}},  {"&", {5, BinOp::BitAnd}},  {"==", {6, BinOp::Eq}},
        {"!=", {6, BinOp::Ne}},     {"<", {7, BinOp::Lt}},      {"<=", {7, BinOp::Le}},
        {">", {7, BinOp::Gt}},      {">=", {7, BinOp::Ge}},     {"<<", {8, BinOp::Shl}},
        {">>", {8, BinOp::Shr}},    {"+", {9, BinOp::Add}},     {"-", {9, BinOp::Sub}},
        {"*", {10, BinOp::Mul}},    {"/", {10, BinOp::Div}},    {"%", {10, BinOp::Rem}}};
    auto it = m.find(t.text);
    if (it == m.end()) return -1;
    *op = it->second.second;
    return it->second.first;
  }

  ExprPtr parse_binary(int min_prec) {
    ExprPtr lhs = parse_unary();
    while (true) {
      BinOp op;
      int prec = precedence(peek(), &op);
      if (prec < 0 || prec <= min_prec) break;
      int line = next().line;
      ExprPtr rhs = parse_binary(prec);
      lhs = make_binary(op, lhs, rhs, line);
    }
    return lhs;
  }

  bool is_cast_ahead() const {
    if (!is("(")) return false;
    const Token& t = peek(1);
    if (t.kind != Tok::Ident) return false;
    if (lookup_var_shadowed(t.text)) return false;
    return starts_type(1);
  }

  bool lookup_var_shadowed(const std::string& name) const {
    // a variable shadowing a typedef name makes "(name)" an expression
    return !typedefs_.count(name) ? false : lookup_var(name).has_value();
  }

  ExprPtr parse_unary() {
    const Token& t = peek();
    int line = t.line;
    if (t.kind == Tok::Punct) {
      if (t.text == "-") {
        next();
        return make_unary(UnOp::Neg, parse_unary(), line);
      }
      if (t.text == "+") {
        next();
        ExprPtr e = parse_unary();
        // unary plus only promotes
        return make_expr(Cast{cint::promote(e->type), e}, cint::promote(e->type), line);
      }
      if (t.text == "~") {
        next();
        return make_unary(UnOp::BitNot, parse_unary(), line);
      }
      if (t.text == "!") {
        next();
        return make_unary(UnOp::LogNot, parse_unary(), line);
      }
      if (t.text == "*") throw Unsupported{line, "pointer dereference"};
      if (t.text == "&") throw Unsupported{line, "address-of"};
      if (t.text == "++" || t.text == "--") throw Unsupported{line, "increment inside expression"};
      if (is_cast_ahead()) {
        next();
        TypeSpec ts = parse_type_spec();
        if (is("*")) throw Unsupported{peek().line, "pointer"};
        expect(")");
        if (ts.is_void) throw Unsupported{line, "void cast"};
        ExprPtr e = parse_unary();
        return make_expr(Cast{ts.type, e}, ts.type, line);
      }
    }
    if (t.kind == Tok::Ident && t.text == "sizeof") throw Unsupported{line, "sizeof"};
    return parse_postfix();
  }

  ExprPtr parse_postfix() {
    ExprPtr e = parse_primary();
    if (is("[")) throw Unsupported{peek().line, "array"};
    if (is("->") || is(".")) throw Unsupported{peek().line, "struct member access"};
    if (is("++") || is("--")) throw Unsupported{peek().line, "increment inside expression"};
    return e;
  }

  ExprPtr parse_primary() {
    const Token& t = peek();
    int line = t.line;
    switch (t.kind) {
      case Tok::Number: {
        std::string text = next().text;
        if (text.find_first_of(".eEpP") != std::string::npos &&
            !(text.size() > 1 && (text[1] == 'x' || text[1] == 'X') &&
              text.find_first_of(".pP") == std::string::npos)) {
          throw Unsupported{line, "floating-point literal"};
        }
        auto v = parse_int_literal(text);
        if (!v) throw ParseError(line, "invalid integer literal " + text);
        return make_expr(IntLit{*v, text}, v->type, line);
      }
      case Tok::Char: {
        std::string text = next().text;
        auto v = parse_char_literal(text);
        if (!v) throw ParseError(line, "invalid character literal");
        return make_expr(IntLit{cint::Value{*v, cint::kInt}, std::to_string(*v)}, cint::kInt, line);
      }
      case Tok::String:
        throw Unsupported{line, "string literal"};
      case Tok::Punct:
        if (t.text == "(") {
          next();
          ExprPtr e = parse_expr();
          expect(")");
          return e;
        }
        if (t.text == "{") throw Unsupported{line, "initializer list"};
        throw ParseError(line, "unexpected '" + t.text + "'");
      case Tok::Ident:
        return parse_identifier();
      case Tok::Directive:
        throw Unsupported{line, "preprocessor directive"};
      case Tok::End:
        throw ParseError(line, "unexpected end of input");
    }
    throw ParseError(line, "unexpected token");
  }

  ExprPtr parse_identifier() {
    int line = peek().line;
    std::string name = next().text;
    if (name == "true" && !lookup_var(name) && !enum_consts_.count(name)) {
      return make_expr(IntLit{cint::Value{1, cint::kInt}, "1"}, cint::kInt, line);
    }
    if (name == "false" && !lookup_var(name) && !enum_consts_.count(name)) {
      return make_expr(IntLit{cint::Value{0, cint::kInt}, "0"}, cint::kInt, line);
    }
    if (is("(")) {
      if (standalone_) throw ParseError(line, "call in standalone expression");
      if (heap_functions().count(name)) throw Unsupported{line, name};
      static const std::string prefix = "__VERIFIER_nondet_";
      if (name.rfind(prefix, 0) == 0) {
        std::string suffix = name.substr(prefix.size());
        auto it = nondet_types().find(suffix);
        if (it == nondet_types().end()) throw Unsupported{line, name};
        expect("(");
        expect(")");
        int site = static_cast<int>(prog_.nondet_vars.size());
        std::string synthetic = name + "@" + std::to_string(line);
        prog_.nondet_vars.push_back(NondetVar{synthetic, it->second, line, name});
        return make_expr(Nondet{name, it->second, site}, it->second, line);
      }
      if (name == "__VERIFIER_assume" || halt_functions().count(name)) {
        if (!(sigs_.count(name) && sigs_.at(name).defined)) {
          throw Unsupported{line, name + " inside expression"};
        }
      }
      auto sit = sigs_.find(name);
      if (sit == sigs_.end()) throw Unsupported{line, "call to undeclared function " + name};
      FunctionSig& sig = sit->second;
      if (!sig.defined && sig.first_use_line == 0) sig.first_use_line = line;
      expect("(");
      std::vector<ExprPtr> args;
      if (!is(")")) {
        while (true) {
          args.push_back(parse_conditional());
          if (!accept(",")) break;
        }
      }
      expect(")");
      if (args.size() != sig.params.size()) {
        throw ParseError(line, "wrong number of arguments to " + name);
      }
      IntType rt = sig.returns_void ? cint::kInt : sig.ret;
      return make_expr(Call{name, std::move(args)}, rt, line);
    }
    if (auto r = lookup_var(name)) return make_expr(Var{*r}, r->type, line);
    auto ec = enum_consts_.find(name);
    if (ec != enum_consts_.end()) {
      return make_expr(IntLit{cint::Value{ec->second, cint::kInt}, std::to_string(ec->second)},
                       cint::kInt, line);
    }
    throw ParseError(line, "undeclared identifier " + name);
  }

  std::optional<cint::Value> const_eval(const Expr& e) {
    return std::visit(
        [&](const auto& n) -> std::optional<cint::Value> {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, IntLit>) {
            return n.value;
          } else if constexpr (std::is_same_v<N, Unary>) {
            auto v = const_eval(*n.operand);
            if (!v) return std::nullopt;
            return cint::apply(n.op, *v);
          } else if constexpr (std::is_same_v<N, Binary>) {
            auto a = const_eval(*n.lhs);
            auto b = const_eval(*n.rhs);
            if (!a || !b) return std::nullopt;
            return cint::apply(n.op, *a, *b);
          } else if constexpr (std::is_same_v<N, Cast>) {
            auto v = const_eval(*n.operand);
            if (!v) return std::nullopt;
            return cint::convert(*v, n.to);
          } else {
            return std::nullopt;
          }
        },
        e.node);
  }
};

void walk(const StmtList& list, const std::function<void(const Stmt&)>& f);

void walk_stmt(const Stmt& s, const std::function<void(const Stmt&)>& f) {
  f(s);
  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, If>) {
          walk(n.then_body, f);
          walk(n.else_body, f);
        } else if constexpr (std::is_same_v<N, While> || std::is_same_v<N, DoWhile> ||
                             std::is_same_v<N, Block>) {
          walk(n.body, f);
        } else if constexpr (std::is_same_v<N, For>) {
          walk(n.init, f);
          walk(n.step, f);
          walk(n.body, f);
        }
      },
      s.node);
}

void walk(const StmtList& list, const std::function<void(const Stmt&)>& f) {
  for (const auto& s : list) walk_stmt(s, f);
}

std::string prepare_source(std::string_view source, int* line_count) {
  bool numbered = false;
  std::string raw = strip_line_numbers(source, &numbered);
  if (!numbered) raw = std::string(source);
  *line_count = static_cast<int>(split_lines(raw).size());
  return raw;
}

}  // namespace

ParseResult parse_program(std::string_view source) {
  Program prog;
  std::string raw = prepare_source(source, &prog.line_count);
  std::vector<Token> toks = detail::lex(raw);
  try {
    Parser p(std::move(toks), prog);
    p.parse_translation_unit();
  } catch (const Unsupported& u) {
    return UnsupportedConstruct{u.line, u.what};
  }
  return prog;
}

std::vector<const Stmt*> resolve_line(const Program& program, int line) {
  std::vector<const FunctionDef*> fns;
  for (const auto& [name, fn] : program.functions) fns.push_back(&fn);
  std::sort(fns.begin(), fns.end(),
            [](const FunctionDef* a, const FunctionDef* b) { return a->line < b->line; });
  std::vector<const Stmt*> out;
  for (const FunctionDef* fn : fns) {
    walk(fn->body, [&](const Stmt& s) {
      // braces group statements but are not statements themselves
      if (s.line == line && !std::holds_alternative<Block>(s.node)) out.push_back(&s);
    });
  }
  return out;
}

const FunctionDef* function_at_line(const Program& program, int line) {
  for (const auto& [name, fn] : program.functions) {
    if (line >= fn.line && line <= fn.close_line) return &fn;
  }
  return nullptr;
}

std::optional<ExprPtr> parse_expression(std::string_view text, const Program& program,
                                        const FunctionDef* fn, int line) {
  std::vector<Token> toks;
  try {
    toks = detail::lex(text);
  } catch (const ParseError&) {
    return std::nullopt;
  }
  Program scratch = program;  // the parser records nothing for pure expressions
  try {
    Parser p(std::move(toks), scratch);
    ExprPtr e = p.parse_standalone_expression(fn, line);
    if (!p.at_end()) return std::nullopt;
    return e;
  } catch (const ParseError&) {
    return std::nullopt;
  } catch (const Unsupported&) {
    return std::nullopt;
  }
}

}  // namespace termeval::cparse
