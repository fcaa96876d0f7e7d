#include "termeval/precond.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "termeval/evalcore.hpp"
#include "termeval/lasso.hpp"
#include "termeval/subprocess.hpp"

namespace termeval::precond {

using boost::multiprecision::cpp_int;
using cint::Value;

bool Expr::is_formula() const {
  return std::holds_alternative<BoolLit>(node) || std::holds_alternative<Compare>(node) ||
         std::holds_alternative<Logic>(node) || std::holds_alternative<Not>(node);
}

std::string_view to_string(Semantics s) {
  return s == Semantics::BitVector ? "bitvector" : "unbounded";
}

std::string Assignment::to_string() const {
  std::string out;
  for (const auto& [name, v] : values) {
    if (!out.empty()) out += ", ";
    out += name + "=" + std::to_string(v);
  }
  return out;
}

std::string describe(const EquivalenceResult& r) {
  if (std::holds_alternative<Equivalent>(r)) return "Equivalent";
  if (auto* i = std::get_if<Inequivalent>(&r))
    return "Inequivalent (" + i->counterexample.to_string() + ")";
  return "Unknown (" + std::get<Unknown>(r).reason + ")";
}

// ---- lexing -------------------------------------------------------------------

namespace {

struct Token {
  enum Kind { Int, Ident, Op, True, False, End } kind = End;
  std::string text;  // operator spelling or identifier
  std::uint64_t magnitude = 0;
  std::size_t pos = 0;
};

struct LexError {
  std::size_t pos;
  std::string message;
};

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<Token> lex(std::string_view s) {
  static const std::pair<std::string_view, std::string_view> kUnicode[] = {
      {"\xE2\x88\xA7", "&&"}, {"\xE2\x88\xA8", "||"}, {"\xC2\xAC", "!"},
      {"\xE2\x89\xA4", "<="}, {"\xE2\x89\xA5", ">="}, {"\xE2\x89\xA0", "!="},
      {"\xE2\x88\x92", "-"}};
  static const std::string_view kOps[] = {"&&", "||", "<=", ">=", "==", "!=", "(", ")", "<",
                                          ">",  "!",  "+",  "-",  "*",  "/",  "%",  "="};
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    if (std::isdigit(c)) {
      std::size_t j = i;
      cpp_int v = 0;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
        v = v * 10 + (s[j] - '0');
        ++j;
      }
      if (j < s.size() && (std::isalpha(static_cast<unsigned char>(s[j])) || s[j] == '_'))
        throw LexError{j, "unexpected character after number"};
      if (v > std::numeric_limits<std::int64_t>::max())
        throw LexError{i, "integer literal out of range"};
      t.kind = Token::Int;
      t.magnitude = static_cast<std::uint64_t>(v);
      t.text = std::string(s.substr(i, j - i));
      out.push_back(t);
      i = j;
      continue;
    }
    if (std::isalpha(c) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      std::string word(s.substr(i, j - i));
      std::string lw = lower(word);
      if (lw == "and") t = {Token::Op, "&&", 0, i};
      else if (lw == "or") t = {Token::Op, "||", 0, i};
      else if (lw == "not") t = {Token::Op, "!", 0, i};
      else if (lw == "true") t = {Token::True, word, 0, i};
      else if (lw == "false") t = {Token::False, word, 0, i};
      else t = {Token::Ident, word, 0, i};
      out.push_back(t);
      i = j;
      continue;
    }
    bool matched = false;
    for (const auto& [u, op] : kUnicode)
      if (s.substr(i, u.size()) == u) {
        out.push_back({Token::Op, std::string(op), 0, i});
        i += u.size();
        matched = true;
        break;
      }
    if (matched) continue;
    for (std::string_view op : kOps)
      if (s.substr(i, op.size()) == op) {
        out.push_back({Token::Op, op == "=" ? "==" : std::string(op), 0, i});
        i += op.size();
        matched = true;
        break;
      }
    if (!matched) throw LexError{i, "unexpected character '" + std::string(1, s[i]) + "'"};
  }
  out.push_back({Token::End, "", 0, s.size()});
  return out;
}

// ---- parsing ------------------------------------------------------------------

ExprPtr mk(decltype(Expr::node) n) { return std::make_shared<const Expr>(Expr{std::move(n)}); }

class Parser {
 public:
  Parser(std::vector<Token> toks, const std::vector<Variable>* vars)
      : toks_(std::move(toks)), vars_(vars) {}

  ExprPtr parse() {
    ExprPtr e = parse_or();
    if (peek().kind != Token::End) fail(peek().pos, "unexpected '" + peek().text + "'");
    require_formula(e, 0);
    return e;
  }

 private:
  std::vector<Token> toks_;
  const std::vector<Variable>* vars_;
  std::size_t i_ = 0;

  [[noreturn]] void fail(std::size_t pos, std::string msg) { throw LexError{pos, std::move(msg)}; }
  const Token& peek() const { return toks_[i_]; }
  bool is_op(std::string_view op) const { return peek().kind == Token::Op && peek().text == op; }

  void require_formula(const ExprPtr& e, std::size_t pos) {
    if (!e->is_formula()) fail(pos, "expected a comparison or logical formula");
  }
  void require_term(const ExprPtr& e, std::size_t pos) {
    if (e->is_formula()) fail(pos, "logical formula used as an arithmetic operand");
  }

  ExprPtr parse_or() {
    std::size_t pos = peek().pos;
    ExprPtr lhs = parse_and();
    while (is_op("||")) {
      require_formula(lhs, pos);
      pos = toks_[++i_].pos;
      ExprPtr rhs = parse_and();
      require_formula(rhs, pos);
      lhs = mk(Logic{false, lhs, rhs});
    }
    return lhs;
  }

  ExprPtr parse_and() {
    std::size_t pos = peek().pos;
    ExprPtr lhs = parse_not();
    while (is_op("&&")) {
      require_formula(lhs, pos);
      pos = toks_[++i_].pos;
      ExprPtr rhs = parse_not();
      require_formula(rhs, pos);
      lhs = mk(Logic{true, lhs, rhs});
    }
    return lhs;
  }

  ExprPtr parse_not() {
    if (is_op("!")) {
      std::size_t pos = toks_[++i_].pos;
      ExprPtr e = parse_not();
      require_formula(e, pos);
      return mk(Not{e});
    }
    return parse_cmp();
  }

  static std::optional<BinOp> cmp_op(const Token& t) {
    if (t.kind != Token::Op) return std::nullopt;
    if (t.text == "<") return BinOp::Lt;
    if (t.text == "<=") return BinOp::Le;
    if (t.text == ">") return BinOp::Gt;
    if (t.text == ">=") return BinOp::Ge;
    if (t.text == "==") return BinOp::Eq;
    if (t.text == "!=") return BinOp::Ne;
    return std::nullopt;
  }

  ExprPtr parse_cmp() {
    std::size_t pos = peek().pos;
    ExprPtr lhs = parse_add();
    ExprPtr result;
    while (auto op = cmp_op(peek())) {
      require_term(lhs, pos);
      pos = toks_[++i_].pos;
      ExprPtr rhs = parse_add();
      require_term(rhs, pos);
      ExprPtr c = mk(Compare{*op, lhs, rhs});
      result = result ? mk(Logic{true, result, c}) : c;
      lhs = rhs;
    }
    return result ? result : lhs;
  }

  ExprPtr parse_add() {
    std::size_t pos = peek().pos;
    ExprPtr lhs = parse_mul();
    while (is_op("+") || is_op("-")) {
      BinOp op = peek().text == "+" ? BinOp::Add : BinOp::Sub;
      require_term(lhs, pos);
      pos = toks_[++i_].pos;
      ExprPtr rhs = parse_mul();
      require_term(rhs, pos);
      lhs = mk(Arith{op, lhs, rhs});
    }
    return lhs;
  }

  ExprPtr parse_mul() {
    std::size_t pos = peek().pos;
    ExprPtr lhs = parse_unary();
    while (is_op("*") || is_op("/") || is_op("%")) {
      BinOp op = peek().text == "*" ? BinOp::Mul : peek().text == "/" ? BinOp::Div : BinOp::Rem;
      require_term(lhs, pos);
      pos = toks_[++i_].pos;
      ExprPtr rhs = parse_unary();
      require_term(rhs, pos);
      lhs = mk(Arith{op, lhs, rhs});
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (is_op("-") || is_op("+")) {
      bool neg = peek().text == "-";
      std::size_t pos = toks_[++i_].pos;
      ExprPtr e = parse_unary();
      require_term(e, pos);
      return neg ? mk(Neg{e}) : e;
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Token::Int:
        ++i_;
        return mk(IntLit{t.magnitude});
      case Token::True:
      case Token::False:
        ++i_;
        return mk(BoolLit{t.kind == Token::True});
      case Token::Ident: {
        if (vars_ && std::none_of(vars_->begin(), vars_->end(),
                                  [&](const Variable& v) { return v.name == t.text; }))
          fail(t.pos, "unknown identifier '" + t.text + "'");
        ++i_;
        return mk(VarRef{t.text});
      }
      case Token::Op:
        if (t.text == "(") {
          ++i_;
          ExprPtr e = parse_or();
          if (!is_op(")")) fail(peek().pos, "expected ')'");
          ++i_;
          return e;
        }
        fail(t.pos, "dangling operator '" + t.text + "'");
      case Token::End:
        fail(t.pos, "unexpected end of input");
    }
    fail(t.pos, "unexpected token");
  }
};

}  // namespace

std::variant<ExprPtr, ParseError> parse_precondition(std::string_view text,
                                                     const std::vector<Variable>* vars) {
  try {
    return Parser(lex(text), vars).parse();
  } catch (const LexError& e) {
    return ParseError{e.pos, e.message};
  }
}

namespace {

void collect_vars(const Expr& e, std::vector<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, VarRef>) {
          if (std::find(out.begin(), out.end(), n.name) == out.end()) out.push_back(n.name);
        } else if constexpr (std::is_same_v<N, Neg> || std::is_same_v<N, Not>) {
          collect_vars(*n.operand, out);
        } else if constexpr (std::is_same_v<N, Arith> || std::is_same_v<N, Compare> ||
                             std::is_same_v<N, Logic>) {
          collect_vars(*n.lhs, out);
          collect_vars(*n.rhs, out);
        }
      },
      e.node);
}

int precedence(const Expr& e) {
  if (auto* l = std::get_if<Logic>(&e.node)) return l->is_and ? 2 : 1;
  if (std::holds_alternative<Not>(e.node)) return 3;
  if (std::holds_alternative<Compare>(e.node)) return 4;
  if (auto* a = std::get_if<Arith>(&e.node))
    return a->op == BinOp::Add || a->op == BinOp::Sub ? 5 : 6;
  if (std::holds_alternative<Neg>(e.node)) return 7;
  return 8;
}

std::string print_at(const Expr& e, int min_prec);

std::string print_node(const Expr& e) {
  return std::visit(
      [&](const auto& n) -> std::string {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, BoolLit>) {
          return n.value ? "(0 == 0)" : "(0 != 0)";
        } else if constexpr (std::is_same_v<N, IntLit>) {
          return std::to_string(n.magnitude);
        } else if constexpr (std::is_same_v<N, VarRef>) {
          return n.name;
        } else if constexpr (std::is_same_v<N, Neg>) {
          bool bare = std::holds_alternative<IntLit>(n.operand->node) ||
                      std::holds_alternative<VarRef>(n.operand->node);
          return bare ? "-" + print_node(*n.operand) : "-(" + print_node(*n.operand) + ")";
        } else if constexpr (std::is_same_v<N, Not>) {
          return "!(" + print_node(*n.operand) + ")";
        } else if constexpr (std::is_same_v<N, Arith>) {
          int p = precedence(e);
          return print_at(*n.lhs, p) + " " + std::string(cint::spelling(n.op)) + " " +
                 print_at(*n.rhs, p + 1);
        } else if constexpr (std::is_same_v<N, Compare>) {
          return print_at(*n.lhs, 5) + " " + std::string(cint::spelling(n.op)) + " " +
                 print_at(*n.rhs, 5);
        } else {
          int p = precedence(e);
          return print_at(*n.lhs, p) + (n.is_and ? " && " : " || ") + print_at(*n.rhs, p + 1);
        }
      },
      e.node);
}

std::string print_at(const Expr& e, int min_prec) {
  std::string s = print_node(e);
  return precedence(e) < min_prec ? "(" + s + ")" : s;
}

}  // namespace

std::vector<std::string> variables_of(const Expr& e) {
  std::vector<std::string> out;
  collect_vars(e, out);
  return out;
}

std::string print(const Expr& e) { return print_node(e); }

// ---- evaluation ---------------------------------------------------------------

namespace {

struct Env {
  const std::vector<Variable>& vars;
  const Assignment& a;

  IntType type_of(const std::string& name) const {
    for (const auto& v : vars)
      if (v.name == name) return v.type;
    return cint::kInt;
  }
  std::int64_t value_of(const std::string& name) const {
    for (const auto& [n, v] : a.values)
      if (n == name) return v;
    return 0;
  }
};

std::optional<Value> eval_bv(const Expr& e, const Env& env) {
  return std::visit(
      [&](const auto& n) -> std::optional<Value> {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, IntLit>) {
          return cint::make(static_cast<std::int64_t>(n.magnitude),
                            *cint::literal_type(n.magnitude));
        } else if constexpr (std::is_same_v<N, VarRef>) {
          return cint::make(env.value_of(n.name), env.type_of(n.name));
        } else if constexpr (std::is_same_v<N, Neg>) {
          auto v = eval_bv(*n.operand, env);
          if (!v) return std::nullopt;
          return cint::apply(cint::UnOp::Neg, *v);
        } else if constexpr (std::is_same_v<N, Arith>) {
          auto l = eval_bv(*n.lhs, env);
          if (!l) return std::nullopt;
          auto r = eval_bv(*n.rhs, env);
          if (!r) return std::nullopt;
          return cint::apply(n.op, *l, *r);
        } else {
          return std::nullopt;
        }
      },
      e.node);
}

std::optional<cpp_int> eval_int(const Expr& e, const Env& env) {
  return std::visit(
      [&](const auto& n) -> std::optional<cpp_int> {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, IntLit>) {
          return cpp_int(n.magnitude);
        } else if constexpr (std::is_same_v<N, VarRef>) {
          return cpp_int(env.value_of(n.name));
        } else if constexpr (std::is_same_v<N, Neg>) {
          auto v = eval_int(*n.operand, env);
          if (!v) return std::nullopt;
          return cpp_int(-*v);
        } else if constexpr (std::is_same_v<N, Arith>) {
          auto l = eval_int(*n.lhs, env);
          if (!l) return std::nullopt;
          auto r = eval_int(*n.rhs, env);
          if (!r) return std::nullopt;
          switch (n.op) {
            case BinOp::Add: return cpp_int(*l + *r);
            case BinOp::Sub: return cpp_int(*l - *r);
            case BinOp::Mul: return cpp_int(*l * *r);
            case BinOp::Div:
              if (*r == 0) return std::nullopt;
              return cpp_int(*l / *r);  // truncates like C
            case BinOp::Rem:
              if (*r == 0) return std::nullopt;
              return cpp_int(*l % *r);
            default: return std::nullopt;
          }
        } else {
          return std::nullopt;
        }
      },
      e.node);
}

template <class T>
bool compare_values(BinOp op, const T& l, const T& r) {
  switch (op) {
    case BinOp::Lt: return l < r;
    case BinOp::Le: return l <= r;
    case BinOp::Gt: return l > r;
    case BinOp::Ge: return l >= r;
    case BinOp::Eq: return l == r;
    default: return l != r;
  }
}

std::optional<bool> eval_formula(const Expr& e, const Env& env, Semantics s) {
  if (auto* b = std::get_if<BoolLit>(&e.node)) return b->value;
  if (auto* n = std::get_if<Not>(&e.node)) {
    auto v = eval_formula(*n->operand, env, s);
    if (!v) return std::nullopt;
    return !*v;
  }
  if (auto* l = std::get_if<Logic>(&e.node)) {
    auto lhs = eval_formula(*l->lhs, env, s);
    if (!lhs) return std::nullopt;
    if (*lhs != l->is_and) return *lhs;  // short circuit
    return eval_formula(*l->rhs, env, s);
  }
  const auto& c = std::get<Compare>(e.node);
  if (s == Semantics::BitVector) {
    auto lhs = eval_bv(*c.lhs, env);
    if (!lhs) return std::nullopt;
    auto rhs = eval_bv(*c.rhs, env);
    if (!rhs) return std::nullopt;
    auto r = cint::apply(c.op, *lhs, *rhs);
    if (!r) return std::nullopt;
    return cint::truthy(*r);
  }
  auto lhs = eval_int(*c.lhs, env);
  if (!lhs) return std::nullopt;
  auto rhs = eval_int(*c.rhs, env);
  if (!rhs) return std::nullopt;
  return compare_values(c.op, *lhs, *rhs);
}

std::optional<std::string> undeclared(const Expr& a, const Expr& b,
                                      const std::vector<Variable>& vars) {
  for (const Expr* e : {&a, &b})
    for (const auto& name : variables_of(*e))
      if (std::none_of(vars.begin(), vars.end(), [&](const Variable& v) { return v.name == name; }))
        return name;
  return std::nullopt;
}

}  // namespace

std::optional<bool> evaluate(const Expr& e, const std::vector<Variable>& vars,
                             const Assignment& a, Semantics s) {
  if (!e.is_formula()) return std::nullopt;
  return eval_formula(e, Env{vars, a}, s);
}

// ---- brute force --------------------------------------------------------------

std::vector<std::int64_t> brute_values(IntType t, const EquivalenceConfig& cfg) {
  std::vector<std::int64_t> out = lasso::domain_sequence(cfg.domain_lo, cfg.domain_hi, t);
  std::set<std::int64_t> seen(out.begin(), out.end());
  auto add = [&](cpp_int v) {
    cpp_int lo = cint::min_value(t), hi = cpp_int(cint::max_value(t));
    if (v < lo || v > hi) return;
    std::int64_t bits = cint::normalize(static_cast<std::uint64_t>(v & cpp_int(~0ULL)), t);
    if (seen.insert(bits).second) out.push_back(bits);
  };
  if (cfg.boundary_probes)
    for (int k = 7; k < t.width; ++k) {
      cpp_int p = cpp_int(1) << k;
      for (const cpp_int& v : std::vector<cpp_int>{p, p - 1, p + 1}) {
        add(v);
        add(-v);
      }
    }
  cpp_int lo = cint::min_value(t), hi = cpp_int(cint::max_value(t));
  for (int d = 0; d <= (cfg.boundary_probes ? 16 : 1); ++d) {
    add(lo + d);
    add(hi - d);
  }
  return out;
}

namespace {

// Index tuples with max index == s, lexicographic; returns false to stop.
bool shell_tuples(std::size_t k, std::size_t s, const std::vector<std::size_t>& sizes,
                  std::vector<std::size_t>& cur, std::size_t pos, bool has_s,
                  const std::function<bool(const std::vector<std::size_t>&)>& visit) {
  if (pos == k) return has_s ? visit(cur) : true;
  std::size_t top = std::min(s, sizes[pos] - 1);
  bool last_needs_s = !has_s && pos + 1 == k;
  for (std::size_t v = last_needs_s ? s : 0; v <= top; ++v) {
    cur[pos] = v;
    if (!shell_tuples(k, s, sizes, cur, pos + 1, has_s || v == s, visit)) return false;
  }
  return true;
}

std::optional<std::int64_t> literal_value(const Expr& e) {
  if (auto* l = std::get_if<IntLit>(&e.node)) return static_cast<std::int64_t>(l->magnitude);
  if (auto* n = std::get_if<Neg>(&e.node))
    if (auto v = literal_value(*n->operand)) return -*v;
  return std::nullopt;
}

void collect_constants(const Expr& e, std::set<std::int64_t>& literals, std::set<std::int64_t>& factors,
                       std::set<std::int64_t>& divisors) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, IntLit>) {
          auto m = static_cast<std::int64_t>(n.magnitude);
          literals.insert(m);
          literals.insert(-m);
        } else if constexpr (std::is_same_v<T, Neg> || std::is_same_v<T, Not>) {
          collect_constants(*n.operand, literals, factors, divisors);
        } else if constexpr (std::is_same_v<T, Arith> || std::is_same_v<T, Compare> ||
                             std::is_same_v<T, Logic>) {
          if constexpr (std::is_same_v<T, Arith>) {
            if (n.op == BinOp::Mul)
              for (const auto* side : {&n.lhs, &n.rhs})
                if (auto v = literal_value(**side); v && *v != 0) factors.insert(*v);
            if (n.op == BinOp::Div || n.op == BinOp::Rem)
              if (auto v = literal_value(*n.rhs); v && *v != 0) divisors.insert(*v);
          }
          collect_constants(*n.lhs, literals, factors, divisors);
          collect_constants(*n.rhs, literals, factors, divisors);
        }
      },
      e.node);
}

// Points where a constant multiple wraps onto a literal: t with m*t = c + d
// (mod 2^width) for each factor m, literal c and d in {-1, 0, 1}, shifted by
// the literals that may be added to the variable before multiplication.
// Also literals scaled by one or two constant divisors, and their neighbours.
std::vector<std::int64_t> constant_probes(const Expr& a, const Expr& b, IntType t) {
  std::set<std::int64_t> literals{0}, factors, divisors;
  collect_constants(a, literals, factors, divisors);
  collect_constants(b, literals, factors, divisors);
  std::set<std::int64_t> out;
  const cpp_int modulus = cpp_int(1) << t.width;
  auto keep = [&](const cpp_int& v) {
    if (v >= cint::min_value(t) && v <= cpp_int(cint::max_value(t)))
      out.insert(cint::normalize(static_cast<std::uint64_t>(v & cpp_int(~0ULL)), t));
  };
  std::vector<cpp_int> scales;
  for (std::int64_t d : divisors) {
    scales.push_back(d);
    for (std::int64_t e : divisors) scales.push_back(cpp_int(d) * e);
  }
  for (const cpp_int& k : scales)
    for (std::int64_t c : literals)
      for (int d = -1; d <= 1; ++d) {
        cpp_int base = (cpp_int(c) + d) * k;
        for (int off = -2; off <= 2; ++off) keep(base + off);
      }
  auto mod = [&](cpp_int v) {
    v %= modulus;
    return v < 0 ? v + modulus : v;
  };
  for (std::int64_t m : factors) {
    cpp_int um = mod(m);
    int twos = 0;
    while (twos < t.width && !bit_test(um, twos)) ++twos;
    const cpp_int odd_mod = cpp_int(1) << (t.width - twos);
    cpp_int odd = (um >> twos) % odd_mod;
    // inverse of an odd number modulo a power of two by Newton iteration
    cpp_int inv = 1;
    for (int i = 0; i < 7; ++i) inv = (inv * (2 - odd * inv)) % odd_mod;
    inv = (inv % odd_mod + odd_mod) % odd_mod;
    for (std::int64_t c : literals)
      for (int d = -1; d <= 1; ++d) {
        cpp_int target = mod(cpp_int(c) + d);
        if (twos > 0 && (target & ((cpp_int(1) << twos) - 1)) != 0) continue;
        cpp_int base = ((target >> twos) * inv) % odd_mod;
        for (int j = 0; j < std::min(twos + 1, 2); ++j) {
          cpp_int sol = base + j * odd_mod;
          for (std::int64_t shift : literals) {
            cpp_int v = mod(sol - shift);
            for (const cpp_int& w : {v, mod(-v)})
              out.insert(cint::normalize(static_cast<std::uint64_t>(w & cpp_int(~0ULL)), t));
          }
        }
      }
  }
  return {out.begin(), out.end()};
}

}  // namespace

EquivalenceResult check_brute(const Expr& a, const Expr& b, const std::vector<Variable>& vars,
                              const EquivalenceConfig& cfg) {
  if (auto name = undeclared(a, b, vars)) return Unknown{"undeclared variable " + *name};
  if (!a.is_formula() || !b.is_formula()) return Unknown{"operand is not a formula"};
  std::vector<std::vector<std::int64_t>> values;
  std::vector<std::size_t> sizes;
  std::size_t widest = 0;
  for (const auto& v : vars) {
    values.push_back(brute_values(v.type, cfg));
    if (cfg.boundary_probes) {
      std::set<std::int64_t> seen(values.back().begin(), values.back().end());
      for (std::int64_t p : constant_probes(a, b, v.type))
        if (seen.insert(p).second) values.back().push_back(p);
    }
    sizes.push_back(values.back().size());
    widest = std::max(widest, sizes.back());
  }
  std::uint64_t tried = 0, skipped = 0;
  bool capped = false;
  std::optional<Assignment> cex;
  Assignment asg;
  for (const auto& v : vars) asg.values.emplace_back(v.name, 0);
  Env env{vars, asg};
  auto visit = [&](const std::vector<std::size_t>& idx) {
    if (tried >= cfg.max_assignments) {
      capped = true;
      return false;
    }
    ++tried;
    for (std::size_t i = 0; i < idx.size(); ++i) asg.values[i].second = values[i][idx[i]];
    auto va = eval_formula(a, env, cfg.semantics);
    auto vb = va ? eval_formula(b, env, cfg.semantics) : std::nullopt;
    if (!va || !vb) {
      ++skipped;
      return true;
    }
    if (*va != *vb) {
      cex = asg;
      return false;
    }
    return true;
  };
  std::vector<std::size_t> cur(vars.size());
  if (vars.empty()) {
    visit(cur);
  } else {
    for (std::size_t s = 0; s < widest; ++s)
      if (!shell_tuples(vars.size(), s, sizes, cur, 0, false, visit)) break;
  }
  if (cex) return Inequivalent{*cex};
  if (capped) return Unknown{"assignment cap reached"};
  if (tried > 0 && skipped == tried) return Unknown{"degenerate: every assignment is undefined"};
  return Equivalent{};
}

// ---- SMT-LIB ------------------------------------------------------------------

namespace {

struct Term {
  std::string text;
  IntType type;
};

class Encoder {
 public:
  Encoder(const std::vector<Variable>& vars, Semantics s) : vars_(vars), s_(s) {}

  std::string var_sort(IntType t) const {
    return s_ == Semantics::BitVector ? "(_ BitVec " + std::to_string(t.width) + ")" : "Int";
  }

  IntType type_of(const std::string& name) const {
    for (const auto& v : vars_)
      if (v.name == name) return v.type;
    return cint::kInt;
  }

  // Bit-vector constant of type t holding the low bits of v.
  static std::string bv_const(cpp_int v, IntType t) {
    cpp_int mod = cpp_int(1) << t.width;
    v %= mod;
    if (v < 0) v += mod;
    return "(_ bv" + v.str() + " " + std::to_string(t.width) + ")";
  }

  static std::string convert(const Term& x, IntType to) {
    if (x.type.width == to.width) return x.text;
    if (to.width > x.type.width) {
      std::string ext = x.type.is_signed ? "sign_extend" : "zero_extend";
      return "((_ " + ext + " " + std::to_string(to.width - x.type.width) + ") " + x.text + ")";
    }
    return "((_ extract " + std::to_string(to.width - 1) + " 0) " + x.text + ")";
  }

  Term term(const Expr& e) const {
    return std::visit(
        [&](const auto& n) -> Term {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, IntLit>) {
            IntType t = *cint::literal_type(n.magnitude);
            if (s_ == Semantics::Unbounded) return {std::to_string(n.magnitude), t};
            return {bv_const(cpp_int(n.magnitude), t), t};
          } else if constexpr (std::is_same_v<N, VarRef>) {
            return {quote(n.name), type_of(n.name)};
          } else if constexpr (std::is_same_v<N, Neg>) {
            Term x = term(*n.operand);
            if (s_ == Semantics::Unbounded) return {"(- " + x.text + ")", x.type};
            IntType t = cint::promote(x.type);
            return {"(bvneg " + convert(x, t) + ")", t};
          } else if constexpr (std::is_same_v<N, Arith>) {
            Term l = term(*n.lhs), r = term(*n.rhs);
            if (s_ == Semantics::Unbounded) return {int_arith(n.op, l.text, r.text), cint::kLong};
            IntType t = cint::common_type(cint::promote(l.type), cint::promote(r.type));
            std::string a = convert(l, t), b = convert(r, t);
            const char* op = nullptr;
            switch (n.op) {
              case BinOp::Add: op = "bvadd"; break;
              case BinOp::Sub: op = "bvsub"; break;
              case BinOp::Mul: op = "bvmul"; break;
              case BinOp::Div: op = t.is_signed ? "bvsdiv" : "bvudiv"; break;
              default: op = t.is_signed ? "bvsrem" : "bvurem"; break;
            }
            return {"(" + std::string(op) + " " + a + " " + b + ")", t};
          } else {
            return {"", cint::kInt};
          }
        },
        e.node);
  }

  std::string int_arith(BinOp op, const std::string& a, const std::string& b) const {
    switch (op) {
      case BinOp::Add: return "(+ " + a + " " + b + ")";
      case BinOp::Sub: return "(- " + a + " " + b + ")";
      case BinOp::Mul: return "(* " + a + " " + b + ")";
      default: break;
    }
    // truncating quotient from the floor-based `div` on magnitudes
    std::string q = "(ite (= (>= " + a + " 0) (>= " + b + " 0)) (div (abs " + a + ") (abs " + b +
                    ")) (- (div (abs " + a + ") (abs " + b + "))))";
    if (op == BinOp::Div) return q;
    return "(- " + a + " (* " + b + " " + q + "))";
  }

  std::string formula(const Expr& e) const {
    if (auto* b = std::get_if<BoolLit>(&e.node)) return b->value ? "true" : "false";
    if (auto* n = std::get_if<Not>(&e.node)) return "(not " + formula(*n->operand) + ")";
    if (auto* l = std::get_if<Logic>(&e.node))
      return "(" + std::string(l->is_and ? "and " : "or ") + formula(*l->lhs) + " " +
             formula(*l->rhs) + ")";
    const auto& c = std::get<Compare>(e.node);
    Term l = term(*c.lhs), r = term(*c.rhs);
    std::string a = l.text, b = r.text;
    bool is_signed = true;
    if (s_ == Semantics::BitVector) {
      IntType t = cint::common_type(cint::promote(l.type), cint::promote(r.type));
      a = convert(l, t);
      b = convert(r, t);
      is_signed = t.is_signed;
    }
    auto rel = [&](const char* bv_s, const char* bv_u, const char* in) {
      std::string op = s_ == Semantics::Unbounded ? in : is_signed ? bv_s : bv_u;
      return "(" + op + " " + a + " " + b + ")";
    };
    switch (c.op) {
      case BinOp::Lt: return rel("bvslt", "bvult", "<");
      case BinOp::Le: return rel("bvsle", "bvule", "<=");
      case BinOp::Gt: return rel("bvsgt", "bvugt", ">");
      case BinOp::Ge: return rel("bvsge", "bvuge", ">=");
      case BinOp::Eq: return "(= " + a + " " + b + ")";
      default: return "(not (= " + a + " " + b + "))";
    }
  }

  // Conditions under which evaluation reaches no division by zero.
  std::vector<std::string> term_defined(const Expr& e) const {
    std::vector<std::string> out;
    if (auto* n = std::get_if<Neg>(&e.node)) return term_defined(*n->operand);
    if (auto* a = std::get_if<Arith>(&e.node)) {
      out = term_defined(*a->lhs);
      auto r = term_defined(*a->rhs);
      out.insert(out.end(), r.begin(), r.end());
      if (a->op == BinOp::Div || a->op == BinOp::Rem) {
        Term l = term(*a->lhs), d = term(*a->rhs);
        if (s_ == Semantics::Unbounded) {
          out.push_back("(not (= " + d.text + " 0))");
        } else {
          IntType t = cint::common_type(cint::promote(l.type), cint::promote(d.type));
          out.push_back("(not (= " + convert(d, t) + " " + bv_const(0, t) + "))");
        }
      }
    }
    return out;
  }

  static std::string conj(const std::vector<std::string>& xs) {
    if (xs.empty()) return "true";
    if (xs.size() == 1) return xs[0];
    std::string s = "(and";
    for (const auto& x : xs) s += " " + x;
    return s + ")";
  }

  std::string defined(const Expr& e) const {
    if (std::holds_alternative<BoolLit>(e.node)) return "true";
    if (auto* n = std::get_if<Not>(&e.node)) return defined(*n->operand);
    if (auto* l = std::get_if<Logic>(&e.node)) {
      std::string dl = defined(*l->lhs), dr = defined(*l->rhs);
      if (dr == "true") return dl;
      std::string guard = l->is_and ? "(not " + formula(*l->lhs) + ")" : formula(*l->lhs);
      std::vector<std::string> parts;
      if (dl != "true") parts.push_back(dl);
      parts.push_back("(or " + guard + " " + dr + ")");
      return conj(parts);
    }
    const auto& c = std::get<Compare>(e.node);
    auto xs = term_defined(*c.lhs);
    auto ys = term_defined(*c.rhs);
    xs.insert(xs.end(), ys.begin(), ys.end());
    return conj(xs);
  }

  static std::string quote(const std::string& name) { return "|" + name + "|"; }

 private:
  const std::vector<Variable>& vars_;
  Semantics s_;
};

}  // namespace

std::string emit_smtlib(const Expr& a, const Expr& b, const std::vector<Variable>& vars,
                        Semantics s, std::string_view logic) {
  Encoder enc(vars, s);
  std::string lg(logic);
  if (lg.empty()) lg = s == Semantics::BitVector ? "QF_BV" : "QF_NIA";
  std::ostringstream out;
  out << "(set-logic " << lg << ")\n";
  out << "(set-option :produce-models true)\n";
  for (const auto& v : vars)
    out << "(declare-const " << Encoder::quote(v.name) << " " << enc.var_sort(v.type) << ")\n";
  std::vector<std::string> parts;
  for (const Expr* e : {&a, &b}) {
    std::string d = enc.defined(*e);
    if (d != "true") parts.push_back(d);
  }
  parts.push_back("(not (= " + enc.formula(a) + " " + enc.formula(b) + "))");
  out << "(assert " << Encoder::conj(parts) << ")\n";
  out << "(check-sat)\n(get-model)\n";
  return out.str();
}

// ---- models -------------------------------------------------------------------

namespace {

struct Sexp {
  std::string atom;
  std::vector<Sexp> list;
  bool is_list = false;
};

std::optional<Sexp> read_sexp(std::string_view s, std::size_t& i) {
  auto skip = [&] {
    while (i < s.size()) {
      if (std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      else if (s[i] == ';')
        while (i < s.size() && s[i] != '\n') ++i;
      else break;
    }
  };
  skip();
  if (i >= s.size()) return std::nullopt;
  if (s[i] == '(') {
    ++i;
    Sexp out;
    out.is_list = true;
    for (;;) {
      skip();
      if (i >= s.size()) return std::nullopt;
      if (s[i] == ')') {
        ++i;
        return out;
      }
      auto child = read_sexp(s, i);
      if (!child) return std::nullopt;
      out.list.push_back(std::move(*child));
    }
  }
  if (s[i] == ')') return std::nullopt;
  Sexp out;
  if (s[i] == '|') {
    std::size_t j = s.find('|', i + 1);
    if (j == std::string_view::npos) return std::nullopt;
    out.atom = std::string(s.substr(i + 1, j - i - 1));
    i = j + 1;
    return out;
  }
  std::size_t j = i;
  while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])) && s[j] != '(' &&
         s[j] != ')')
    ++j;
  out.atom = std::string(s.substr(i, j - i));
  i = j;
  return out;
}

std::optional<cpp_int> model_value(const Sexp& v) {
  try {
    if (!v.is_list) {
      const std::string& a = v.atom;
      if (a.rfind("#x", 0) == 0) return cpp_int("0x" + a.substr(2));
      if (a.rfind("#b", 0) == 0) {
        cpp_int r = 0;
        for (char c : a.substr(2)) r = r * 2 + (c == '1');
        return r;
      }
      return cpp_int(a);
    }
    if (v.list.size() == 3 && v.list[0].atom == "_" && v.list[1].atom.rfind("bv", 0) == 0)
      return cpp_int(v.list[1].atom.substr(2));
    if (v.list.size() == 2 && v.list[0].atom == "-") {
      auto inner = model_value(v.list[1]);
      if (inner) return cpp_int(-*inner);
    }
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

}  // namespace

std::optional<Assignment> parse_model(std::string_view text, const std::vector<Variable>& vars,
                                      Semantics s) {
  Assignment a;
  for (const auto& v : vars) a.values.emplace_back(v.name, 0);
  std::size_t i = 0;
  bool found = false;
  while (auto e = read_sexp(text, i)) {
    std::vector<const Sexp*> stack = {&*e};
    while (!stack.empty()) {
      const Sexp* x = stack.back();
      stack.pop_back();
      if (!x->is_list) continue;
      if (x->list.size() == 5 && x->list[0].atom == "define-fun") {
        found = true;
        const std::string& name = x->list[1].atom;
        auto value = model_value(x->list[4]);
        if (!value) return std::nullopt;
        for (std::size_t k = 0; k < vars.size(); ++k)
          if (vars[k].name == name) {
            cpp_int v = *value;
            if (s == Semantics::BitVector) {
              a.values[k].second = cint::normalize(
                  static_cast<std::uint64_t>(v & cpp_int(~0ULL)), vars[k].type);
            } else {
              if (v < std::numeric_limits<std::int64_t>::min() ||
                  v > std::numeric_limits<std::int64_t>::max())
                return std::nullopt;
              a.values[k].second = static_cast<std::int64_t>(v);
            }
          }
        continue;
      }
      for (const auto& c : x->list) stack.push_back(&c);
    }
  }
  if (!found && !vars.empty()) return std::nullopt;
  return a;
}

EquivalenceResult check_smt(const Expr& a, const Expr& b, const std::vector<Variable>& vars,
                            const EquivalenceConfig& cfg) {
  if (auto name = undeclared(a, b, vars)) return Unknown{"undeclared variable " + *name};
  if (!a.is_formula() || !b.is_formula()) return Unknown{"operand is not a formula"};
  if (cfg.solver.empty()) return Unknown{"no solver"};
  std::string query = emit_smtlib(a, b, vars, cfg.semantics, cfg.logic);
  ProcessResult pr = run_process(cfg.solver, query, cfg.solver_timeout);
  if (!pr.spawned) return Unknown{"no solver"};
  if (pr.timed_out) return Unknown{"solver timeout"};
  std::istringstream lines(pr.output);
  std::string first;
  while (std::getline(lines, first))
    if (first.find_first_not_of(" \t\r") != std::string::npos) break;
  first.erase(first.find_last_not_of(" \t\r") + 1);
  first.erase(0, first.find_first_not_of(" \t"));
  if (first == "unsat") {
    // unsat may only mean that no assignment defines both sides
    Encoder enc(vars, cfg.semantics);
    std::string da = enc.defined(a), db = enc.defined(b);
    if (da == "true" && db == "true") return Equivalent{};
    std::string probe = query.substr(0, query.find("(assert ")) + "(assert " + Encoder::conj({da, db}) +
                        ")\n(check-sat)\n";
    ProcessResult dp = run_process(cfg.solver, probe, cfg.solver_timeout);
    if (dp.timed_out) return Unknown{"solver timeout"};
    std::string verdict = dp.output.substr(0, dp.output.find('\n'));
    verdict.erase(verdict.find_last_not_of(" \t\r") + 1);
    if (verdict == "unsat") return Unknown{"degenerate: every assignment is undefined"};
    if (verdict != "sat") return Unknown{"solver returned " + verdict + " on the definedness query"};
    return Equivalent{};
  }
  if (first == "unknown") return Unknown{"solver returned unknown"};
  if (first != "sat") return Unknown{"solver error: " + first};
  std::string rest((std::istreambuf_iterator<char>(lines)), std::istreambuf_iterator<char>());
  auto model = parse_model(rest, vars, cfg.semantics);
  if (!model) return Unknown{"unreadable solver model"};
  auto va = evaluate(a, vars, *model, cfg.semantics);
  auto vb = evaluate(b, vars, *model, cfg.semantics);
  if (!va || !vb || *va == *vb) return Unknown{"solver model does not separate the expressions"};
  return Inequivalent{*model};
}

EquivalenceResult check_equivalence(const Expr& a, const Expr& b,
                                    const std::vector<Variable>& vars, Backend backend,
                                    const EquivalenceConfig& cfg) {
  if (backend == Backend::Brute) return check_brute(a, b, vars, cfg);
  if (backend == Backend::Smt) return check_smt(a, b, vars, cfg);
  EquivalenceResult brute = check_brute(a, b, vars, cfg);
  EquivalenceResult smt = check_smt(a, b, vars, cfg);
  if (brute.index() == smt.index() && !std::holds_alternative<Unknown>(brute)) return brute;
  return Unknown{"divergent backends: brute " + describe(brute) + ", smt " + describe(smt)};
}

namespace {

std::string_view trim_view(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string extract_answer(std::string_view raw) {
  std::string lower = lowercase(raw);
  std::string_view picked;
  std::size_t close = lower.rfind("</answer>");
  std::size_t open = close == std::string::npos ? std::string::npos : lower.rfind("<answer>", close);
  if (open != std::string::npos) {
    picked = raw.substr(open + 8, close - open - 8);
  } else if (std::size_t label = lower.rfind("answer:"); label != std::string::npos) {
    std::string_view rest = raw.substr(label + 7);
    std::size_t nl = rest.find('\n');
    picked = trim_view(rest.substr(0, nl));
    // the label may stand alone on its line
    while (picked.empty() && nl != std::string_view::npos) {
      rest = rest.substr(nl + 1);
      nl = rest.find('\n');
      std::string_view line = trim_view(rest.substr(0, nl));
      if (!line.empty() && line.find("```") != 0) picked = line;
      else if (line.empty() && nl == std::string_view::npos) break;
    }
  } else {
    std::string_view rest = raw;
    while (!rest.empty()) {
      std::size_t nl = rest.rfind('\n', rest.size() - 1);
      std::string_view line = trim_view(nl == std::string_view::npos ? rest : rest.substr(nl + 1));
      if (!line.empty() && line.find("```") != 0) {
        picked = line;
        break;
      }
      if (nl == std::string_view::npos) break;
      rest = rest.substr(0, nl);
    }
  }

  std::string out(trim_view(picked));
  auto strip = [&](std::string_view edge) {
    bool changed = false;
    while (out.size() >= 2 * edge.size() && out.compare(0, edge.size(), edge) == 0 &&
           out.compare(out.size() - edge.size(), edge.size(), edge) == 0) {
      out = std::string(trim_view(std::string_view(out).substr(edge.size(), out.size() - 2 * edge.size())));
      changed = true;
    }
    return changed;
  };
  auto period = [&] {
    if (out.empty() || out.back() != '.') return false;
    out = std::string(trim_view(std::string_view(out).substr(0, out.size() - 1)));
    return true;
  };
  // "**Answer:** x" leaves the closing bold marker in front
  if (open == std::string::npos && out.starts_with("**") && !out.ends_with("**"))
    out = std::string(trim_view(std::string_view(out).substr(2)));
  while (strip("```") || strip("**") || strip("`") || strip("$") || period()) {}
  return out;
}

PassAtKResult precondition_pass_at_k(const std::vector<std::string>& generations,
                                     const Expr& ground_truth, const std::vector<Variable>& vars,
                                     std::uint64_t k, Backend backend,
                                     const EquivalenceConfig& cfg) {
  PassAtKResult r;
  r.n = generations.size();
  for (const auto& g : generations) {
    auto parsed = parse_precondition(g, &vars);
    if (auto* err = std::get_if<ParseError>(&parsed)) {
      r.per_generation.push_back(Unknown{"parse error at " + std::to_string(err->position) +
                                         ": " + err->message});
      continue;
    }
    r.per_generation.push_back(
        check_equivalence(*std::get<ExprPtr>(parsed), ground_truth, vars, backend, cfg));
    if (std::holds_alternative<Equivalent>(r.per_generation.back())) ++r.c;
  }
  r.pass_at_1 = eval::pass_at_k(r.n, r.c, 1);
  r.pass_at_k = eval::pass_at_k(r.n, r.c, k);
  return r;
}

}  // namespace termeval::precond
