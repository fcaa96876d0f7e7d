#include "termeval/witness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <set>

namespace termeval::witness {

using nlohmann::json;

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::T: return "T";
    case Verdict::NT: return "NT";
    case Verdict::UNK: return "UNK";
  }
  return "UNK";
}

std::optional<Verdict> verdict_from_string(std::string_view s) {
  if (s == "T") return Verdict::T;
  if (s == "NT") return Verdict::NT;
  if (s == "UNK") return Verdict::UNK;
  return std::nullopt;
}

const WitnessNode* WitnessAutomaton::node(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id && *n.id == id) return &n;
  }
  return nullptr;
}

const WitnessEdge* WitnessAutomaton::edge(std::string_view id) const {
  for (const auto& e : edges) {
    if (e.id && *e.id == id) return &e;
  }
  return nullptr;
}

// ---- JSON extraction -----------------------------------------------------

namespace {

// End (exclusive) of the brace-balanced region starting at text[start] == '{',
// treating JSON string literals as opaque.
std::optional<std::size_t> match_braces(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::pair<std::size_t, std::size_t>> find_last_json_object(std::string_view text) {
  std::optional<std::pair<std::size_t, std::size_t>> best;
  std::size_t covered_until = 0;  // objects nested in an accepted one cannot win
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{' || i < covered_until) continue;
    auto end = match_braces(text, i);
    if (!end) continue;
    json j = json::parse(text.substr(i, *end - i), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) continue;
    covered_until = *end;
    if (!best || *end > best->second) best = std::make_pair(i, *end);
  }
  return best;
}

namespace {

std::optional<bool> as_bool(const json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "true") return true;
    if (s == "false") return false;
  }
  return std::nullopt;
}

std::optional<std::string> as_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  return std::nullopt;
}

std::optional<long long> as_line(const json& v) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_unsigned()) return static_cast<long long>(v.get<unsigned long long>());
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    long long out = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc() && p == s.data() + s.size()) return out;
  }
  return std::nullopt;
}

template <typename T, typename F>
void read_field(const json& obj, const char* key, std::optional<T>& out, F conv,
                const std::string& where, std::vector<std::string>& errors) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  auto v = conv(*it);
  if (!v) {
    errors.push_back(where + ": field '" + key + "' has invalid type");
    return;
  }
  out = *v;
}

}  // namespace

WitnessAutomaton witness_from_json(const json& j, std::vector<std::string>& errors) {
  WitnessAutomaton w;
  if (!j.is_object()) {
    errors.push_back("witness is not an object");
    return w;
  }
  auto nodes = j.find("nodes");
  if (nodes == j.end() || !nodes->is_array()) {
    errors.push_back("witness.nodes missing or not an array");
  } else {
    std::size_t k = 0;
    for (const auto& n : *nodes) {
      std::string where = "node #" + std::to_string(k++);
      if (!n.is_object()) {
        errors.push_back(where + " is not an object");
        continue;
      }
      WitnessNode node;
      read_field(n, "id", node.id, as_string, where, errors);
      read_field(n, "entry", node.entry, as_bool, where, errors);
      read_field(n, "cyclehead", node.cyclehead, as_bool, where, errors);
      w.nodes.push_back(std::move(node));
    }
  }
  auto edges = j.find("edges");
  if (edges == j.end() || !edges->is_array()) {
    errors.push_back("witness.edges missing or not an array");
  } else {
    std::size_t k = 0;
    for (const auto& e : *edges) {
      std::string where = "edge #" + std::to_string(k++);
      if (!e.is_object()) {
        errors.push_back(where + " is not an object");
        continue;
      }
      WitnessEdge edge;
      read_field(e, "id", edge.id, as_string, where, errors);
      read_field(e, "source", edge.source, as_string, where, errors);
      read_field(e, "target", edge.target, as_string, where, errors);
      read_field(e, "line", edge.line, as_line, where, errors);
      read_field(e, "sourcecode", edge.sourcecode, as_string, where, errors);
      read_field(e, "control", edge.control, as_string, where, errors);
      read_field(e, "assumption", edge.assumption, as_string, where, errors);
      read_field(e, "enterLoopHead", edge.enterLoopHead, as_bool, where, errors);
      read_field(e, "enterFunction", edge.enterFunction, as_string, where, errors);
      read_field(e, "returnFrom", edge.returnFrom, as_string, where, errors);
      w.edges.push_back(std::move(edge));
    }
  }
  return w;
}

json witness_to_json(const WitnessAutomaton& w) {
  json nodes = json::array();
  for (const auto& n : w.nodes) {
    json o = json::object();
    if (n.id) o["id"] = *n.id;
    if (n.entry) o["entry"] = *n.entry;
    if (n.cyclehead) o["cyclehead"] = *n.cyclehead;
    nodes.push_back(std::move(o));
  }
  json edges = json::array();
  for (const auto& e : w.edges) {
    json o = json::object();
    if (e.id) o["id"] = *e.id;
    if (e.source) o["source"] = *e.source;
    if (e.target) o["target"] = *e.target;
    if (e.line) o["line"] = *e.line;
    if (e.sourcecode) o["sourcecode"] = *e.sourcecode;
    if (e.control) o["control"] = *e.control;
    if (e.assumption) o["assumption"] = *e.assumption;
    if (e.enterLoopHead) o["enterLoopHead"] = *e.enterLoopHead;
    if (e.enterFunction) o["enterFunction"] = *e.enterFunction;
    if (e.returnFrom) o["returnFrom"] = *e.returnFrom;
    edges.push_back(std::move(o));
  }
  return json{{"nodes", nodes}, {"edges", edges}};
}

std::variant<Prediction, FormatError> parse_prediction(std::string_view raw) {
  auto range = find_last_json_object(raw);
  if (!range) return FormatError{"no JSON object found"};
  json j = json::parse(raw.substr(range->first, range->second - range->first));
  auto v = j.find("verdict");
  if (v == j.end()) return FormatError{"verdict key missing"};
  Prediction p;
  p.raw_text = std::string(raw);
  if (v->is_null()) {
    p.verdict = Verdict::UNK;
  } else if (v->is_boolean()) {
    p.verdict = v->get<bool>() ? Verdict::T : Verdict::NT;
  } else {
    return FormatError{"verdict is not a boolean or null"};
  }
  auto w = j.find("witness");
  if (w != j.end() && !w->is_null()) {
    if (p.verdict == Verdict::NT) {
      p.witness = witness_from_json(*w, p.witness_errors);
    } else {
      p.ignored_witness = true;
    }
  }
  return p;
}

// ---- schema validation ------------------------------------------------------

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::DuplicateNodeId: return "DuplicateNodeId";
    case ViolationKind::DuplicateEdgeId: return "DuplicateEdgeId";
    case ViolationKind::MissingField: return "MissingField";
    case ViolationKind::NoEntry: return "NoEntry";
    case ViolationKind::MultipleEntry: return "MultipleEntry";
    case ViolationKind::NoCyclehead: return "NoCyclehead";
    case ViolationKind::DanglingEdge: return "DanglingEdge";
    case ViolationKind::UnreachableCyclehead: return "UnreachableCyclehead";
    case ViolationKind::NoCycle: return "NoCycle";
    case ViolationKind::InvalidControl: return "InvalidControl";
    case ViolationKind::NonPositiveLine: return "NonPositiveLine";
    case ViolationKind::LineOutOfRange: return "LineOutOfRange";
  }
  return "?";
}

std::string SchemaViolation::to_string() const {
  std::string s(witness::to_string(kind));
  if (!subject.empty() || !detail.empty()) {
    s += "(" + subject;
    if (!detail.empty()) s += (subject.empty() ? "" : ", ") + detail;
    s += ")";
  }
  return s;
}

std::vector<SchemaViolation> validate_schema(const WitnessAutomaton& w,
                                             std::optional<int> program_lines) {
  std::vector<SchemaViolation> out;
  using K = ViolationKind;

  std::set<std::string> node_ids;
  std::set<std::string> reported;
  for (std::size_t k = 0; k < w.nodes.size(); ++k) {
    const auto& n = w.nodes[k];
    if (!n.id || n.id->empty()) {
      out.push_back({K::MissingField, "node #" + std::to_string(k), "id"});
      continue;
    }
    if (!node_ids.insert(*n.id).second && reported.insert(*n.id).second) {
      out.push_back({K::DuplicateNodeId, *n.id, ""});
    }
  }
  std::set<std::string> edge_ids;
  reported.clear();
  for (std::size_t k = 0; k < w.edges.size(); ++k) {
    const auto& e = w.edges[k];
    std::string name = e.id && !e.id->empty() ? *e.id : "edge #" + std::to_string(k);
    if (!e.id || e.id->empty()) out.push_back({K::MissingField, name, "id"});
    else if (!edge_ids.insert(*e.id).second && reported.insert(*e.id).second) {
      out.push_back({K::DuplicateEdgeId, *e.id, ""});
    }
    if (!e.source) out.push_back({K::MissingField, name, "source"});
    if (!e.target) out.push_back({K::MissingField, name, "target"});
    if (!e.line) out.push_back({K::MissingField, name, "line"});
    if (!e.sourcecode) out.push_back({K::MissingField, name, "sourcecode"});
    if (e.line && *e.line <= 0) out.push_back({K::NonPositiveLine, name, std::to_string(*e.line)});
    if (e.line && *e.line > 0 && program_lines && *e.line > *program_lines) {
      out.push_back({K::LineOutOfRange, name, std::to_string(*e.line)});
    }
    if (e.control && *e.control != "condition-true" && *e.control != "condition-false") {
      out.push_back({K::InvalidControl, name, *e.control});
    }
    if (e.source && !node_ids.count(*e.source)) out.push_back({K::DanglingEdge, name, *e.source});
    if (e.target && !node_ids.count(*e.target)) out.push_back({K::DanglingEdge, name, *e.target});
  }

  std::vector<std::string> entries, heads;
  for (const auto& n : w.nodes) {
    if (!n.id) continue;
    if (n.entry.value_or(false)) entries.push_back(*n.id);
    if (n.cyclehead.value_or(false)) heads.push_back(*n.id);
  }
  if (entries.empty()) out.push_back({K::NoEntry, "", ""});
  if (entries.size() > 1) out.push_back({K::MultipleEntry, "", ""});
  if (heads.empty()) out.push_back({K::NoCyclehead, "", ""});

  // Reachability over well-formed edges only.
  std::map<std::string, std::vector<std::string>> succ;
  for (const auto& e : w.edges) {
    if (e.source && e.target && node_ids.count(*e.source) && node_ids.count(*e.target)) {
      succ[*e.source].push_back(*e.target);
    }
  }
  auto reach_from = [&](const std::string& start, bool include_start) {
    std::set<std::string> seen;
    std::vector<std::string> stack;
    if (include_start) seen.insert(start);
    for (const auto& t : succ[start]) stack.push_back(t);
    while (!stack.empty()) {
      std::string cur = stack.back();
      stack.pop_back();
      if (!seen.insert(cur).second) continue;
      for (const auto& t : succ[cur]) stack.push_back(t);
    }
    return seen;
  };
  if (entries.size() == 1 && !heads.empty()) {
    std::set<std::string> from_entry = reach_from(entries[0], true);
    bool any_reachable = false, any_lasso = false;
    for (const auto& h : heads) {
      bool reachable = from_entry.count(h) > 0;
      bool on_cycle = reach_from(h, false).count(h) > 0;
      any_reachable = any_reachable || reachable;
      any_lasso = any_lasso || (reachable && on_cycle);
    }
    if (!any_reachable) out.push_back({K::UnreachableCyclehead, "", ""});
    else if (!any_lasso) out.push_back({K::NoCycle, "", ""});
  }
  return out;
}

}  // namespace termeval::witness
