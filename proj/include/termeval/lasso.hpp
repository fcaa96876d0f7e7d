#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "termeval/cparse.hpp"
#include "termeval/interp.hpp"
#include "termeval/witness.hpp"

namespace termeval::lasso {

/// Stem from the entry node to the first visit of the cyclehead, then a
/// simple cycle from the cyclehead back to itself.
struct LassoPath {
  std::string entry;
  std::string cyclehead;
  std::vector<witness::WitnessEdge> stem;
  std::vector<witness::WitnessEdge> cycle;
};

struct NoLasso {
  std::string reason;
};

/// Edge ids are compared in natural order, so "E2" sorts before "E10".
bool natural_less(std::string_view a, std::string_view b);

/// Uses the first cyclehead (input order) that is reachable from the entry
/// and lies on a cycle. Among candidate stems and cycles the smallest
/// edge-id sequence wins.
std::variant<LassoPath, NoLasso> extract_lasso(const witness::WitnessAutomaton& w);

struct CheckerConfig {
  std::int64_t domain_lo = -64;
  std::int64_t domain_hi = 64;
  /// Per-variable overrides keyed by nondet_vars[].variable.
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> domain_overrides;
  std::uint64_t max_assignments = 20000;
  std::uint64_t max_steps = 200000;
  std::uint64_t bounded_cycle_target = 1000;
};

/// One value per nondet call site, in site order.
struct Assignment {
  std::vector<std::pair<std::string, std::int64_t>> values;

  std::string to_string() const;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct ProvenInfinite {
  cparse::MachineState state;  // the repeating state at the cyclehead
  std::string rendered_state;  // "i=0" style, innermost frame plus globals
  Assignment assignment;
  std::uint64_t cycles = 0;  // cycles completed when the repetition was seen
};

struct BoundedEvidence {
  std::uint64_t cycles = 0;
  Assignment assignment;
};

struct Infeasible {
  std::string edge_id;
};

struct Unknown {
  enum class Reason { BudgetExhausted, AssignmentCap, Unsupported, BadAssumption, EmptyCycle };
  Reason reason;
  std::string detail;
};

using FeasibilityResult = std::variant<ProvenInfinite, BoundedEvidence, Infeasible, Unknown>;

std::string describe(const FeasibilityResult& r);
std::string_view to_string(Unknown::Reason r);

/// Guided simulation. Every assignment of the nondet sites over the
/// configured domain is tried in shell order (small magnitudes first);
/// precedence across assignments is ProvenInfinite, BoundedEvidence,
/// Infeasible, Unknown.
FeasibilityResult check_feasibility(const cparse::Program& p, const LassoPath& lasso,
                                    const CheckerConfig& cfg = {});
FeasibilityResult check_feasibility(const cparse::ParseResult& p, const LassoPath& lasso,
                                    const CheckerConfig& cfg = {});

/// Outcome of following the lasso under a single assignment.
struct RunOutcome {
  enum class Kind { Proven, Bounded, Violated, Budget } kind;
  std::string edge_id;  // Violated
  std::uint64_t cycles = 0;
  cparse::MachineState state;
};

/// Exposed for tests. Throws std::invalid_argument for an unparseable
/// assumption.
RunOutcome follow_lasso(const cparse::CompiledProgram& cp, const LassoPath& lasso,
                        const std::vector<std::int64_t>& site_values, const CheckerConfig& cfg);

/// Values tried for one variable: 0, 1, -1, 2, -2, ... clipped to the
/// domain and the type's range.
std::vector<std::int64_t> domain_sequence(std::int64_t lo, std::int64_t hi, cint::IntType t);

/// Index tuples in shell order: every tuple whose largest index is s comes
/// before any tuple with a larger maximum, lexicographic within a shell.
/// `sizes[i]` bounds index i. Stops after `cap` tuples.
std::vector<std::vector<std::size_t>> shell_order(const std::vector<std::size_t>& sizes,
                                                  std::uint64_t cap);

// ---- external validator -----------------------------------------------------

struct ValidatorConfig {
  std::string validator_root;  // directory containing Ultimate.py
  std::string architecture = "32bit";
  std::string property_path = "../properties/termination.prp";
  std::chrono::seconds timeout{60};
};

struct Validated {};
struct Rejected {};
struct ToolError {
  std::string output;
};
using ValidatorResult = std::variant<Validated, Rejected, ToolError>;

/// Argument vector passed to the validator, in order.
std::vector<std::string> validator_command(const std::string& program_path,
                                           const std::string& graphml_path,
                                           const ValidatorConfig& cfg);

/// Maps the tool's printed verdict: FALSE validates, TRUE rejects.
ValidatorResult interpret_validator_output(const std::string& output);

ValidatorResult run_external_validator(const std::string& program_path,
                                       const std::string& graphml_path,
                                       const ValidatorConfig& cfg);

}  // namespace termeval::lasso
