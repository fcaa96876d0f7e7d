#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <chrono>
#include <ctime>
#include <map>
#include <sstream>
#include <stdexcept>

#include "termeval/text.hpp"
#include "termeval/witness.hpp"

namespace termeval::witness {

namespace {

struct KeyDecl {
  const char* id;
  const char* name;
  const char* type;
  const char* domain;
  const char* default_value;  // nullptr when absent
};

// Pinned key set; see docs/graphml-format.md.
constexpr KeyDecl kKeys[] = {
    {"witness-type", "witness-type", "string", "graph", nullptr},
    {"sourcecodelang", "sourcecodelang", "string", "graph", nullptr},
    {"producer", "producer", "string", "graph", nullptr},
    {"specification", "specification", "string", "graph", nullptr},
    {"programfile", "programfile", "string", "graph", nullptr},
    {"programhash", "programhash", "string", "graph", nullptr},
    {"architecture", "architecture", "string", "graph", nullptr},
    {"creationtime", "creationtime", "string", "graph", nullptr},
    {"entry", "isEntryNode", "boolean", "node", "false"},
    {"cyclehead", "cyclehead", "boolean", "node", "false"},
    {"startline", "startline", "int", "edge", nullptr},
    {"sourcecode", "sourcecode", "string", "edge", nullptr},
    {"control", "control", "string", "edge", nullptr},
    {"assumption", "assumption", "string", "edge", nullptr},
    {"enterLoopHead", "enterLoopHead", "boolean", "edge", "false"},
    {"enterFunction", "enterFunction", "string", "edge", nullptr},
    {"returnFrom", "returnFromFunction", "string", "edge", nullptr},
};

std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

void data(std::ostringstream& os, const char* indent, const char* key, std::string_view value) {
  os << indent << "<data key=\"" << key << "\">" << escape(value) << "</data>\n";
}

}  // namespace

std::string iso8601_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string emit_graphml(const WitnessAutomaton& w, const ProgramInfo& program,
                         const ProducerMeta& meta) {
  auto violations = validate_schema(w);
  if (!violations.empty()) {
    throw std::invalid_argument("witness fails schema validation: " + violations[0].to_string());
  }
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n";
  os << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" "
        "xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\">\n";
  for (const KeyDecl& k : kKeys) {
    os << "  <key attr.name=\"" << k.name << "\" attr.type=\"" << k.type << "\" for=\""
       << k.domain << "\" id=\"" << k.id << "\"";
    if (k.default_value) {
      os << ">\n    <default>" << k.default_value << "</default>\n  </key>\n";
    } else {
      os << "/>\n";
    }
  }
  os << "  <graph edgedefault=\"directed\">\n";
  const char* gi = "    ";
  data(os, gi, "witness-type", "violation_witness");
  data(os, gi, "sourcecodelang", "C");
  data(os, gi, "producer", meta.producer);
  data(os, gi, "specification", meta.specification);
  data(os, gi, "programfile", program.programfile);
  data(os, gi, "programhash", sha256_hex(program.source));
  data(os, gi, "architecture", program.architecture);
  data(os, gi, "creationtime", meta.creationtime.empty() ? iso8601_now() : meta.creationtime);

  const char* di = "      ";
  for (const auto& n : w.nodes) {
    bool entry = n.entry.value_or(false), head = n.cyclehead.value_or(false);
    os << "    <node id=\"" << escape(*n.id) << "\"";
    if (!entry && !head) {
      os << "/>\n";
      continue;
    }
    os << ">\n";
    if (entry) data(os, di, "entry", "true");
    if (head) data(os, di, "cyclehead", "true");
    os << "    </node>\n";
  }
  for (const auto& e : w.edges) {
    os << "    <edge id=\"" << escape(*e.id) << "\" source=\"" << escape(*e.source)
       << "\" target=\"" << escape(*e.target) << "\">\n";
    data(os, di, "startline", std::to_string(*e.line));
    data(os, di, "sourcecode", *e.sourcecode);
    if (e.control && !e.control->empty()) data(os, di, "control", *e.control);
    if (e.assumption && !e.assumption->empty()) data(os, di, "assumption", *e.assumption);
    if (e.enterLoopHead.value_or(false)) data(os, di, "enterLoopHead", "true");
    if (e.enterFunction && !e.enterFunction->empty()) {
      data(os, di, "enterFunction", *e.enterFunction);
    }
    if (e.returnFrom && !e.returnFrom->empty()) data(os, di, "returnFrom", *e.returnFrom);
    os << "    </edge>\n";
  }
  os << "  </graph>\n</graphml>\n";
  return os.str();
}

GraphmlDocument read_graphml(std::string_view xml) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(xml)};
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw std::runtime_error(std::string("malformed GraphML: ") + e.what());
  }
  const pt::ptree* root = tree.get_child_optional("graphml").get_ptr();
  if (!root) throw std::runtime_error("missing <graphml> root");

  // Canonical field name for each key id: our pinned ids, or attr.name for
  // documents whose ids differ.
  std::map<std::string, std::string> canon;
  std::map<std::string, std::string> by_name;
  for (const KeyDecl& k : kKeys) by_name[k.name] = k.id;
  for (const auto& [tag, child] : *root) {
    if (tag != "key") continue;
    std::string id = child.get<std::string>("<xmlattr>.id", "");
    std::string name = child.get<std::string>(pt::ptree::path_type("<xmlattr>/attr.name", '/'), "");
    auto it = by_name.find(name);
    canon[id] = it != by_name.end() ? it->second : id;
  }
  auto field = [&](const std::string& key) {
    auto it = canon.find(key);
    return it != canon.end() ? it->second : key;
  };
  auto truthy = [](const std::string& v) { return v == "true" || v == "1"; };

  const pt::ptree* graph = root->get_child_optional("graph").get_ptr();
  if (!graph) throw std::runtime_error("missing <graph>");

  GraphmlDocument doc;
  for (const auto& [tag, child] : *graph) {
    if (tag == "data") {
      doc.graph_data.emplace_back(field(child.get<std::string>("<xmlattr>.key", "")),
                                  child.get_value<std::string>());
    } else if (tag == "node") {
      WitnessNode n;
      n.id = child.get<std::string>("<xmlattr>.id");
      for (const auto& [dtag, d] : child) {
        if (dtag != "data") continue;
        std::string f = field(d.get<std::string>("<xmlattr>.key", ""));
        std::string v = d.get_value<std::string>();
        if (f == "entry") n.entry = truthy(v);
        if (f == "cyclehead") n.cyclehead = truthy(v);
      }
      doc.automaton.nodes.push_back(std::move(n));
    } else if (tag == "edge") {
      WitnessEdge e;
      if (auto id = child.get_optional<std::string>("<xmlattr>.id")) e.id = *id;
      e.source = child.get<std::string>("<xmlattr>.source");
      e.target = child.get<std::string>("<xmlattr>.target");
      for (const auto& [dtag, d] : child) {
        if (dtag != "data") continue;
        std::string f = field(d.get<std::string>("<xmlattr>.key", ""));
        std::string v = d.get_value<std::string>();
        if (f == "startline") e.line = std::stoll(v);
        else if (f == "sourcecode") e.sourcecode = v;
        else if (f == "control") e.control = v;
        else if (f == "assumption") e.assumption = v;
        else if (f == "enterLoopHead") e.enterLoopHead = truthy(v);
        else if (f == "enterFunction") e.enterFunction = v;
        else if (f == "returnFrom") e.returnFrom = v;
      }
      doc.automaton.edges.push_back(std::move(e));
    }
  }
  return doc;
}

}  // namespace termeval::witness
