#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "termeval/cint.hpp"

namespace termeval::cparse {

using cint::BinOp;
using cint::IntType;
using cint::UnOp;

/// A resolved variable. Globals index the global table, locals index the
/// frame of the enclosing function. Two references are alpha-equal when they
/// agree on (global, slot); the name is kept for printing and diagnostics.
struct VarRef {
  std::string name;
  bool global = false;
  int slot = 0;
  IntType type;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct IntLit {
  cint::Value value;
  std::string spelling;  // as written, for printing
};
struct Var {
  VarRef ref;
};
struct Unary {
  UnOp op;
  ExprPtr operand;
};
struct Binary {
  BinOp op;
  ExprPtr lhs, rhs;
};
struct Cast {
  IntType to;
  ExprPtr operand;
};
/// `__VERIFIER_nondet_T()`. `site` indexes Program::nondet_vars.
struct Nondet {
  std::string func;
  IntType type;
  int site = 0;
};
/// Call to a function defined in the program.
struct Call {
  std::string callee;
  std::vector<ExprPtr> args;
};

struct Expr {
  std::variant<IntLit, Var, Unary, Binary, Cast, Nondet, Call> node;
  IntType type;
  int line = 0;
};

struct Stmt;
using StmtList = std::vector<Stmt>;

struct Decl {
  VarRef var;
  ExprPtr init;  // may be null
};
struct Assign {
  VarRef lhs;
  ExprPtr rhs;
  std::string op = "=";  // "=", "+=", ..., "++", "--" (printing only)
};
/// `x = __VERIFIER_nondet_T();`, possibly as a declaration initializer.
struct NondetAssign {
  VarRef lhs;
  IntType ctype;
  std::string func;
  int site = 0;
  bool is_decl = false;
};
struct If {
  ExprPtr cond;
  StmtList then_body;
  StmtList else_body;
  bool has_else = false;
  int else_line = 0;
};
struct While {
  ExprPtr cond;
  StmtList body;
};
struct DoWhile {
  StmtList body;
  ExprPtr cond;
  int cond_line = 0;
};
struct For {
  StmtList init;
  ExprPtr cond;  // null means "forever"
  StmtList step;
  StmtList body;
};
struct Return {
  ExprPtr value;  // may be null
};
struct Block {
  StmtList body;
  int close_line = 0;
};
/// Expression evaluated for effect, typically a call to a void function.
struct ExprStmt {
  ExprPtr expr;
};
/// `__VERIFIER_assume(cond)`: executions where cond is false are discarded.
struct Assume {
  ExprPtr cond;
};
/// abort(), exit(..), reach_error(): execution stops.
struct Halt {
  std::string func;
};
struct Break {};
struct Continue {};

struct Stmt {
  int line = 0;
  std::variant<Decl, Assign, NondetAssign, If, While, DoWhile, For, Return, Block,
               ExprStmt, Assume, Halt, Break, Continue>
      node;
};

struct FunctionDef {
  std::string name;
  IntType return_type;
  bool returns_void = false;
  std::vector<VarRef> params;
  StmtList body;
  int line = 0;        // line of the name
  int close_line = 0;  // line of the closing brace
  int num_slots = 0;   // params + locals
  /// Local variables indexed by slot, with the line of each declaration.
  std::vector<VarRef> locals;
  std::vector<int> local_lines;
};

struct GlobalVar {
  VarRef var;
  ExprPtr init;  // may be null (zero-initialized)
  int line = 0;
};

struct NondetVar {
  std::string variable;  // assigned variable, or "<func>@<line>" for nested calls
  IntType type;
  int line = 0;
  std::string func;
};

struct Program {
  std::map<std::string, FunctionDef> functions;
  std::string entry = "main";
  std::vector<GlobalVar> globals;
  std::vector<NondetVar> nondet_vars;  // indexed by call-site id
  int line_count = 0;

  const FunctionDef& entry_function() const { return functions.at(entry); }
};

struct UnsupportedConstruct {
  int line = 0;
  std::string construct;
};

/// Lexical errors (unterminated comment or literal) and syntax errors.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

using ParseResult = std::variant<Program, UnsupportedConstruct>;

/// Accepts raw or "k: "-numbered source. Throws ParseError.
ParseResult parse_program(std::string_view source);

/// Statements (at any depth, in source order) tagged with `line`.
std::vector<const Stmt*> resolve_line(const Program& program, int line);

/// Plain C rendering. Every statement is placed on its original line, so
/// re-parsing the output reproduces the line tags.
std::string print_program(const Program& program);
std::string print_expr(const Expr& e);

/// Alpha-equality: same shape, operators, literals, types, slots and lines.
bool structurally_equal(const Program& a, const Program& b);
bool structurally_equal(const Expr& a, const Expr& b);

/// Parse a standalone expression in the scope of `fn` at `line`: the latest
/// local of that name declared at or before `line`, else a global. Used for
/// witness assumptions. Returns nullopt on any error, including unknown
/// identifiers and calls.
std::optional<ExprPtr> parse_expression(std::string_view text, const Program& program,
                                        const FunctionDef* fn, int line);

/// The function whose definition spans `line`, if any.
const FunctionDef* function_at_line(const Program& program, int line);

}  // namespace termeval::cparse
