#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "termeval/cint.hpp"

namespace termeval::precond {

using cint::BinOp;
using cint::IntType;

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct BoolLit {
  bool value = true;
};
struct IntLit {
  std::uint64_t magnitude = 0;  // signs are Neg nodes
};
struct VarRef {
  std::string name;
};
struct Neg {
  ExprPtr operand;
};
/// + - * / %
struct Arith {
  BinOp op;
  ExprPtr lhs, rhs;
};
/// < <= > >= == !=
struct Compare {
  BinOp op;
  ExprPtr lhs, rhs;
};
struct Logic {
  bool is_and = true;
  ExprPtr lhs, rhs;
};
struct Not {
  ExprPtr operand;
};

struct Expr {
  std::variant<BoolLit, IntLit, VarRef, Neg, Arith, Compare, Logic, Not> node;
  bool is_formula() const;
};

struct Variable {
  std::string name;
  IntType type = cint::kInt;
};

struct ParseError {
  std::size_t position = 0;  // byte offset
  std::string message;
};

/// Accepts and/or/not, &&/||/!, the symbols ∧ ∨ ¬ ≤ ≥ ≠ and U+2212 minus,
/// `=` as `==`, parentheses and decimal literals. `not` and `!` bind looser
/// than comparisons. A chain `a <= b <= c` means `a <= b and b <= c`. When
/// `vars` is given, other identifiers are errors.
std::variant<ExprPtr, ParseError> parse_precondition(std::string_view text,
                                                     const std::vector<Variable>* vars = nullptr);

/// Identifiers in order of first appearance.
std::vector<std::string> variables_of(const Expr& e);

/// Canonical text with `==`, `&&`, `||`, `!`. Also valid C.
std::string print(const Expr& e);

enum class Semantics { BitVector, Unbounded };
std::string_view to_string(Semantics s);

struct Assignment {
  std::vector<std::pair<std::string, std::int64_t>> values;
  std::string to_string() const;  // "x=1, y=-2"
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// nullopt when some division or remainder by zero is reached (after C
/// short-circuiting of && and ||). Unassigned variables read as 0.
std::optional<bool> evaluate(const Expr& e, const std::vector<Variable>& vars,
                             const Assignment& a, Semantics s = Semantics::BitVector);

struct Equivalent {};
struct Inequivalent {
  Assignment counterexample;
};
struct Unknown {
  std::string reason;
};
using EquivalenceResult = std::variant<Equivalent, Inequivalent, Unknown>;

std::string describe(const EquivalenceResult& r);

enum class Backend { Brute, Smt, Both };

struct EquivalenceConfig {
  Semantics semantics = Semantics::BitVector;
  std::int64_t domain_lo = -128, domain_hi = 127;
  bool boundary_probes = true;  // powers of two and their neighbours
  std::uint64_t max_assignments = 20'000'000;
  std::vector<std::string> solver = {"z3", "-in"};
  std::string logic;  // empty: QF_BV, or QF_NIA for unbounded semantics
  std::chrono::milliseconds solver_timeout{20000};
};

/// Per-variable values in the order tried by brute mode.
std::vector<std::int64_t> brute_values(IntType t, const EquivalenceConfig& cfg);

/// With boundary probes on, each variable also takes values derived from the
/// expressions' constants: wrapped solutions of constant multiples and
/// literals scaled by constant divisors.
EquivalenceResult check_brute(const Expr& a, const Expr& b, const std::vector<Variable>& vars,
                              const EquivalenceConfig& cfg = {});

std::string emit_smtlib(const Expr& a, const Expr& b, const std::vector<Variable>& vars,
                        Semantics s = Semantics::BitVector, std::string_view logic = "");

/// Reads `(define-fun name () sort value)` entries from a solver model.
std::optional<Assignment> parse_model(std::string_view text, const std::vector<Variable>& vars,
                                      Semantics s = Semantics::BitVector);

/// unsat is Equivalent only when some assignment defines both sides, else
/// Unknown(degenerate) as in brute mode.
EquivalenceResult check_smt(const Expr& a, const Expr& b, const std::vector<Variable>& vars,
                            const EquivalenceConfig& cfg = {});

EquivalenceResult check_equivalence(const Expr& a, const Expr& b,
                                    const std::vector<Variable>& vars, Backend backend,
                                    const EquivalenceConfig& cfg = {});

/// The expression a generation answers with: the last <answer>...</answer>
/// block, else the text after the last "answer:" label, else the last
/// non-empty line. Code fences, backticks and a trailing period are removed.
std::string extract_answer(std::string_view raw);

struct PassAtKResult {
  std::uint64_t n = 0, c = 0;
  double pass_at_1 = 0, pass_at_k = 0;
  std::vector<EquivalenceResult> per_generation;  // Unknown for unparseable text
};

/// Counts generations equivalent to `ground_truth`; unparseable or
/// undecided generations count as incorrect.
PassAtKResult precondition_pass_at_k(const std::vector<std::string>& generations,
                                     const Expr& ground_truth, const std::vector<Variable>& vars,
                                     std::uint64_t k, Backend backend,
                                     const EquivalenceConfig& cfg = {});

}  // namespace termeval::precond
