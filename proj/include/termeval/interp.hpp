#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "termeval/cparse.hpp"

namespace termeval::cparse {

enum class InstrKind { Assign, Branch, Jump, Call, Return, Assume, Halt };

/// One step of the flattened control-flow graph. Jumps are silent; every
/// other instruction produces exactly one event when executed.
struct Instr {
  InstrKind kind = InstrKind::Jump;
  int line = 0;
  const Stmt* origin = nullptr;
  std::optional<VarRef> dest;  // Assign, Call
  ExprPtr expr;                // Assign rhs, Branch/Assume condition, Return value
  std::string callee;          // Call
  std::vector<ExprPtr> args;   // Call
  int target = -1;             // Jump; Branch when true
  int target_false = -1;       // Branch when false
  bool reads_nondet = false;
};

struct CompiledFunction {
  const FunctionDef* def = nullptr;
  std::vector<Instr> code;
  int num_slots = 0;  // locals plus hoisting temporaries
};

struct CompiledProgram {
  const Program* program = nullptr;
  std::map<std::string, CompiledFunction> functions;
  /// Lines holding at least one event-producing instruction.
  std::set<int> executable_lines;
};

/// Flatten to instructions. Calls nested in expressions are hoisted into
/// temporaries evaluated left to right before the enclosing instruction.
/// The program must outlive the result.
CompiledProgram compile(const Program& program);

struct Frame {
  const CompiledFunction* fn = nullptr;
  int pc = 0;
  std::vector<std::int64_t> slots;
  std::optional<VarRef> ret_dest;

  friend bool operator==(const Frame& a, const Frame& b) {
    return a.fn == b.fn && a.pc == b.pc && a.slots == b.slots &&
           a.ret_dest.has_value() == b.ret_dest.has_value() &&
           (!a.ret_dest || (a.ret_dest->global == b.ret_dest->global &&
                            a.ret_dest->slot == b.ret_dest->slot));
  }
};

struct MachineState {
  std::vector<std::int64_t> globals;
  std::vector<Frame> frames;

  friend bool operator==(const MachineState&, const MachineState&) = default;
};

std::size_t hash_state(const MachineState& s);

enum class EventKind {
  Step,          // an instruction executed; the run continues
  Terminated,    // main returned
  Halted,        // abort/exit/reach_error
  AssumeFailed,  // __VERIFIER_assume(false)
  Fault,         // division by zero or invalid shift
  StackOverflow,
};

struct Event {
  EventKind kind = EventKind::Step;
  const Instr* instr = nullptr;
  std::optional<bool> branch;  // Branch outcome
  bool read_nondet = false;
};

/// Source of values for `__VERIFIER_nondet_*` call sites.
using NondetSource = std::function<cint::Value(int site, IntType type)>;

class Machine {
 public:
  Machine(const CompiledProgram& prog, NondetSource nondet, std::size_t max_depth = 512);

  /// Execute one event-producing instruction (skipping jumps). After a
  /// terminal event further calls return the same terminal kind.
  Event step();

  const MachineState& state() const { return state_; }
  bool finished() const { return finished_.has_value(); }

  /// Current value of a variable in the innermost frame (or globals).
  cint::Value read(const VarRef& v) const;

  /// Evaluate a side-effect-free expression in the current frame.
  std::optional<cint::Value> evaluate(const Expr& e) const;

 private:
  const CompiledProgram& prog_;
  NondetSource nondet_;
  std::size_t max_depth_;
  MachineState state_;
  std::optional<EventKind> finished_;

  std::optional<cint::Value> eval(const Expr& e, bool* read_nondet) const;
  void store(Frame& f, const VarRef& v, cint::Value value);
  void push_frame(const CompiledFunction& fn, const std::vector<cint::Value>& args,
                  std::optional<VarRef> dest);
  Event finish(EventKind k, const Instr* at);
};

/// Evaluate an expression given variable values by name. Calls and nondet
/// reads are rejected (nullopt), as are division by zero and bad shifts.
std::optional<cint::Value> evaluate_with(
    const Expr& e, const std::function<std::optional<cint::Value>(const VarRef&)>& lookup);

}  // namespace termeval::cparse
