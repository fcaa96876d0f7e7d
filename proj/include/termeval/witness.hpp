#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace termeval::witness {

enum class Verdict { T, NT, UNK };

std::string_view to_string(Verdict v);
std::optional<Verdict> verdict_from_string(std::string_view s);

struct WitnessNode {
  std::optional<std::string> id;
  std::optional<bool> entry;
  std::optional<bool> cyclehead;

  friend bool operator==(const WitnessNode&, const WitnessNode&) = default;
};

/// Required fields are optional here so that a witness missing them can
/// still be represented and reported on.
struct WitnessEdge {
  std::optional<std::string> id;
  std::optional<std::string> source;
  std::optional<std::string> target;
  std::optional<long long> line;
  std::optional<std::string> sourcecode;
  std::optional<std::string> control;
  std::optional<std::string> assumption;
  std::optional<bool> enterLoopHead;
  std::optional<std::string> enterFunction;
  std::optional<std::string> returnFrom;

  friend bool operator==(const WitnessEdge&, const WitnessEdge&) = default;
};

struct WitnessAutomaton {
  std::vector<WitnessNode> nodes;
  std::vector<WitnessEdge> edges;

  const WitnessNode* node(std::string_view id) const;
  const WitnessEdge* edge(std::string_view id) const;
  friend bool operator==(const WitnessAutomaton&, const WitnessAutomaton&) = default;
};

struct Prediction {
  Verdict verdict = Verdict::UNK;
  std::optional<WitnessAutomaton> witness;
  std::string raw_text;
  /// Problems converting the `witness` JSON value (wrong shapes or types).
  /// Non-empty means the witness cannot be valid.
  std::vector<std::string> witness_errors;
  /// True when a witness accompanied a T or UNK verdict and was dropped.
  bool ignored_witness = false;
};

struct FormatError {
  std::string message;
};

/// Extract the last well-formed JSON object from free text (prose, code
/// fences, reasoning) and interpret it as a prediction.
std::variant<Prediction, FormatError> parse_prediction(std::string_view raw);

/// Byte range [begin, end) of the last well-formed top-level JSON object in
/// `text`, if any. Exposed for testing.
std::optional<std::pair<std::size_t, std::size_t>> find_last_json_object(std::string_view text);

/// Convert a `witness` JSON value. Type problems are appended to `errors`
/// and the offending field is left unset.
WitnessAutomaton witness_from_json(const nlohmann::json& j, std::vector<std::string>& errors);
nlohmann::json witness_to_json(const WitnessAutomaton& w);

enum class ViolationKind {
  DuplicateNodeId,
  DuplicateEdgeId,
  MissingField,
  NoEntry,
  MultipleEntry,
  NoCyclehead,
  DanglingEdge,
  UnreachableCyclehead,
  NoCycle,
  InvalidControl,
  NonPositiveLine,
  LineOutOfRange,
};

std::string_view to_string(ViolationKind k);

struct SchemaViolation {
  ViolationKind kind;
  std::string subject;  // node/edge id, or empty for graph-level problems
  std::string detail;   // e.g. the missing field name

  std::string to_string() const;
  friend bool operator==(const SchemaViolation&, const SchemaViolation&) = default;
};

/// All violations, in a deterministic order; empty means valid. When
/// `program_lines` is given, edge lines beyond it are reported.
std::vector<SchemaViolation> validate_schema(const WitnessAutomaton& w,
                                             std::optional<int> program_lines = std::nullopt);

struct ProgramInfo {
  std::string programfile;
  std::string source;             // bytes hashed into programhash
  std::string architecture = "32bit";
};

struct ProducerMeta {
  std::string producer = "termeval";
  std::string specification = "CHECK( init(main()), LTL(F end) )";
  std::string creationtime;  // ISO-8601; empty means now (UTC)
};

/// SV-COMP violation-witness GraphML. Throws std::invalid_argument when the
/// automaton fails validate_schema.
std::string emit_graphml(const WitnessAutomaton& w, const ProgramInfo& program,
                         const ProducerMeta& meta = {});

struct GraphmlDocument {
  WitnessAutomaton automaton;
  std::vector<std::pair<std::string, std::string>> graph_data;  // key id -> value
};

/// Read a GraphML witness. Keys are resolved by id and by attr.name, so
/// files from other producers load too. Throws std::runtime_error.
GraphmlDocument read_graphml(std::string_view xml);

std::string iso8601_now();

}  // namespace termeval::witness
