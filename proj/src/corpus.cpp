#include "termeval/corpus.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "termeval/text.hpp"

namespace fs = std::filesystem;

namespace termeval::corpus {

using witness::Verdict;

std::string_view to_string(Category c) {
  switch (c) {
    case Category::BitVectors: return "BitVectors";
    case Category::MainControlFlow: return "MainControlFlow";
    case Category::MainHeap: return "MainHeap";
    case Category::Other: return "Other";
  }
  return "?";
}

std::optional<Category> category_from_string(std::string_view s) {
  for (Category c : kCategories)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

std::string_view to_string(Architecture a) { return a == Architecture::Bits32 ? "32bit" : "64bit"; }

const TaskSpec* CorpusManifest::find(std::string_view task_id) const {
  auto it = std::lower_bound(tasks.begin(), tasks.end(), task_id,
                             [](const TaskSpec& t, std::string_view id) { return t.task_id < id; });
  return it != tasks.end() && it->task_id == task_id ? &*it : nullptr;
}

// ---- tokens -------------------------------------------------------------------

std::uint64_t HeuristicTokenCounter::count(std::string_view, std::string_view source) const {
  return (source.size() + 3) / 4;
}

SidecarTokenCounter SidecarTokenCounter::load(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path.string());
  } catch (const std::exception& e) {
    throw ConfigError("cannot read token sidecar " + path.string() + ": " + e.what());
  }
  std::map<std::string, std::uint64_t> counts;
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw ConfigError("token sidecar " + path.string() + " is not a JSON object");
    for (auto& [k, v] : j.items()) {
      if (!v.is_number_unsigned())
        throw ConfigError("token sidecar entry '" + k + "' is not a nonnegative integer");
      counts[k] = v.get<std::uint64_t>();
    }
    return SidecarTokenCounter(std::move(counts));
  }
  for (std::string_view line : split_lines(text)) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos)
      throw ConfigError("token sidecar line without a tab: " + std::string(line));
    std::string value(line.substr(tab + 1));
    char* end = nullptr;
    unsigned long long n = std::strtoull(value.c_str(), &end, 10);
    if (value.empty() || *end != '\0' || value.front() == '-')
      throw ConfigError("token sidecar count is not a nonnegative integer: " + value);
    counts[std::string(line.substr(0, tab))] = n;
  }
  return SidecarTokenCounter(std::move(counts));
}

std::uint64_t SidecarTokenCounter::count(std::string_view task_id, std::string_view) const {
  auto it = counts_.find(std::string(task_id));
  if (it == counts_.end())
    throw ConfigError("token sidecar has no count for " + std::string(task_id));
  return it->second;
}

std::uint64_t count_tokens(std::string_view task_id, std::string_view source,
                           const TokenCounter* counter) {
  if (!counter) throw ConfigError("no token counter configured");
  return counter->count(task_id, source);
}

// ---- exclusions ---------------------------------------------------------------

std::set<std::string> parse_exclusions(std::string_view text) {
  std::set<std::string> out;
  for (std::string_view line : split_lines(text)) {
    auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    out.emplace(line.substr(b, e - b + 1));
  }
  return out;
}

std::set<std::string> read_exclusions(const fs::path& path) {
  return parse_exclusions(read_file(path.string()));
}

// ---- loading ------------------------------------------------------------------

namespace {

struct CategorySet {
  Category category;
  std::vector<std::string> patterns;
};

std::vector<CategorySet> read_sets(const fs::path& root) {
  std::vector<CategorySet> sets;
  for (Category c : kCategories) {
    fs::path p = root / ("Termination-" + std::string(to_string(c)) + ".set");
    if (!fs::is_regular_file(p)) continue;
    CategorySet s{c, {}};
    for (const auto& pat : parse_exclusions(read_file(p.string()))) s.patterns.push_back(pat);
    sets.push_back(std::move(s));
  }
  return sets;
}

std::optional<Category> match_category(const std::vector<CategorySet>& sets,
                                       const std::string& rel) {
  for (const auto& s : sets)
    for (const auto& pat : s.patterns)
      if (fnmatch(pat.c_str(), rel.c_str(), FNM_PATHNAME) == 0) return s.category;
  return std::nullopt;
}

struct Parsed {
  enum Kind { NotTermination, Task, Error } kind = NotTermination;
  TaskSpec task;
  std::string error;
};

Parsed parse_task(const fs::path& root, const fs::path& yml, const std::string& task_id) {
  Parsed r;
  YAML::Node doc;
  try {
    doc = YAML::LoadFile(yml.string());
  } catch (const std::exception& e) {
    r.kind = Parsed::Error;
    r.error = std::string("invalid YAML: ") + e.what();
    return r;
  }
  std::optional<bool> expected;
  try {
    for (const auto& prop : doc["properties"]) {
      std::string file = prop["property_file"].as<std::string>("");
      if (fs::path(file).filename() != "termination.prp") continue;
      if (!prop["expected_verdict"]) {
        r.kind = Parsed::Error;
        r.error = "termination property without expected_verdict";
        return r;
      }
      expected = prop["expected_verdict"].as<bool>();
    }
  } catch (const std::exception& e) {
    r.kind = Parsed::Error;
    r.error = std::string("malformed properties: ") + e.what();
    return r;
  }
  if (!expected) return r;

  r.kind = Parsed::Error;
  std::vector<std::string> inputs;
  const auto& in = doc["input_files"];
  if (in.IsScalar()) inputs.push_back(in.as<std::string>());
  else if (in.IsSequence())
    for (const auto& f : in) inputs.push_back(f.as<std::string>());
  if (inputs.size() != 1) {
    r.error = "expected exactly one input file, found " + std::to_string(inputs.size());
    return r;
  }
  TaskSpec& t = r.task;
  t.task_id = task_id;
  t.source_path = (yml.parent_path() / inputs.front()).lexically_normal();
  if (!fs::is_regular_file(t.source_path)) {
    r.error = "missing source file " + fs::relative(t.source_path, root).generic_string();
    return r;
  }
  t.source = read_file(t.source_path.string());
  t.numbered_source = number_lines(t.source);
  t.expected = *expected ? Verdict::T : Verdict::NT;
  std::string model = doc["options"]["data_model"].as<std::string>("ILP32");
  t.architecture = model == "LP64" ? Architecture::Bits64 : Architecture::Bits32;
  r.kind = Parsed::Task;
  return r;
}

}  // namespace

CorpusManifest load_manifest(const fs::path& root, const LoadOptions& opts) {
  if (!opts.tokens) throw ConfigError("no token counter configured");
  std::error_code ec;
  if (!fs::is_directory(root, ec))
    throw std::runtime_error("cannot read corpus root " + root.string());

  std::vector<std::pair<std::string, fs::path>> ymls;
  fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw std::runtime_error("cannot read corpus root " + root.string() + ": " + ec.message());
  for (const auto& entry : it) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension();
    if (ext != ".yml" && ext != ".yaml") continue;
    ymls.emplace_back(fs::relative(entry.path(), root).generic_string(), entry.path());
  }
  std::sort(ymls.begin(), ymls.end());

  std::vector<Parsed> parsed(ymls.size());
  unsigned jobs = std::max(1u, std::min<unsigned>(opts.jobs, static_cast<unsigned>(ymls.size())));
  auto work = [&](std::size_t begin) {
    for (std::size_t i = begin; i < ymls.size(); i += jobs)
      parsed[i] = parse_task(root, ymls[i].second, ymls[i].first);
  };
  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j);
    for (auto& th : pool) th.join();
  }

  CorpusManifest m;
  m.root = root;
  auto sets = read_sets(root);
  bool any_termination = false;
  for (std::size_t i = 0; i < ymls.size(); ++i) {
    const std::string& id = ymls[i].first;
    Parsed& p = parsed[i];
    if (p.kind == Parsed::NotTermination) continue;
    any_termination = true;
    auto cat = match_category(sets, id);
    if (!cat) {
      m.unlisted.push_back(id);
      continue;
    }
    if (!opts.categories.count(*cat)) continue;
    if (opts.exclusions.count(id)) {
      m.excluded.push_back(id);
      continue;
    }
    if (p.kind == Parsed::Error) {
      m.errors.push_back({id, p.error});
      continue;
    }
    p.task.category = *cat;
    try {
      p.task.token_count = count_tokens(id, p.task.source, opts.tokens);
    } catch (const ConfigError& e) {
      m.errors.push_back({id, e.what()});
      continue;
    }
    m.tasks.push_back(std::move(p.task));
  }
  if (any_termination && sets.empty())
    m.errors.push_back({"", "no Termination-<Category>.set files in the corpus root"});
  for (const auto& t : m.tasks) {
    ++m.category_counts[t.category];
    ++m.label_counts[t.expected];
  }
  return m;
}

// ---- bins ---------------------------------------------------------------------

LengthBinning assign_length_bins(const CorpusManifest& m) {
  if (m.tasks.size() < 3) throw std::invalid_argument("length binning needs at least 3 tasks");
  std::vector<const TaskSpec*> order;
  for (const auto& t : m.tasks) order.push_back(&t);
  std::sort(order.begin(), order.end(), [](const TaskSpec* a, const TaskSpec* b) {
    return std::tie(a->token_count, a->task_id) < std::tie(b->token_count, b->task_id);
  });
  std::size_t n = order.size(), base = n / 3, extra = n % 3;
  LengthBinning b;
  std::size_t pos = 0;
  for (int bin = 0; bin < 3; ++bin) {
    std::size_t size = base + (static_cast<std::size_t>(bin) < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) b.assignment[order[pos + i]->task_id] = bin;
    pos += size;
    if (bin < 2) b.bin_edges[bin] = order[pos - 1]->token_count;
  }
  return b;
}

// ---- serialization ------------------------------------------------------------

nlohmann::json manifest_to_json(const CorpusManifest& m) {
  nlohmann::json j;
  j["root"] = m.root.generic_string();
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [c, n] : m.category_counts) cats[std::string(to_string(c))] = n;
  j["category_counts"] = cats;
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [v, n] : m.label_counts) labels[std::string(witness::to_string(v))] = n;
  j["label_counts"] = labels;
  j["tasks"] = nlohmann::json::array();
  for (const auto& t : m.tasks)
    j["tasks"].push_back({{"task_id", t.task_id},
                          {"source_path", fs::relative(t.source_path, m.root).generic_string()},
                          {"category", std::string(to_string(t.category))},
                          {"expected_verdict", std::string(witness::to_string(t.expected))},
                          {"architecture", std::string(to_string(t.architecture))},
                          {"token_count", t.token_count},
                          {"source_sha256", sha256_hex(t.source)}});
  j["excluded"] = m.excluded;
  j["unlisted"] = m.unlisted;
  j["errors"] = nlohmann::json::array();
  for (const auto& e : m.errors) j["errors"].push_back({{"task_id", e.task_id}, {"message", e.message}});
  return j;
}

CorpusManifest manifest_from_json(const nlohmann::json& j) {
  CorpusManifest m;
  m.root = j.at("root").get<std::string>();
  for (const auto& jt : j.at("tasks")) {
    TaskSpec t;
    t.task_id = jt.at("task_id").get<std::string>();
    t.source_path = m.root / jt.at("source_path").get<std::string>();
    auto cat = category_from_string(jt.at("category").get<std::string>());
    auto verdict = witness::verdict_from_string(jt.at("expected_verdict").get<std::string>());
    if (!cat || !verdict || *verdict == Verdict::UNK)
      throw std::runtime_error("manifest entry " + t.task_id + " has an invalid category or verdict");
    t.category = *cat;
    t.expected = *verdict;
    t.architecture = jt.value("architecture", "32bit") == "64bit" ? Architecture::Bits64
                                                                  : Architecture::Bits32;
    t.token_count = jt.at("token_count").get<std::uint64_t>();
    if (!fs::is_regular_file(t.source_path))
      throw std::runtime_error("manifest source missing: " + t.source_path.string());
    t.source = read_file(t.source_path.string());
    t.numbered_source = number_lines(t.source);
    m.tasks.push_back(std::move(t));
  }
  std::sort(m.tasks.begin(), m.tasks.end(),
            [](const TaskSpec& a, const TaskSpec& b) { return a.task_id < b.task_id; });
  for (const auto& t : m.tasks) {
    ++m.category_counts[t.category];
    ++m.label_counts[t.expected];
  }
  if (j.contains("excluded")) m.excluded = j["excluded"].get<std::vector<std::string>>();
  if (j.contains("unlisted")) m.unlisted = j["unlisted"].get<std::vector<std::string>>();
  if (j.contains("errors"))
    for (const auto& e : j["errors"])
      m.errors.push_back({e.value("task_id", ""), e.value("message", "")});
  return m;
}

std::string category_table(const CorpusManifest& m) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %8s\n", "category", "tasks", "T", "NT");
  out << buf;
  std::map<Category, std::array<std::uint64_t, 2>> split;
  for (const auto& t : m.tasks) ++split[t.category][t.expected == Verdict::T ? 0 : 1];
  std::uint64_t total = 0;
  for (Category c : kCategories) {
    auto it = m.category_counts.find(c);
    std::uint64_t n = it == m.category_counts.end() ? 0 : it->second;
    total += n;
    std::snprintf(buf, sizeof buf, "%-16s %8llu %8llu %8llu\n", std::string(to_string(c)).c_str(),
                  (unsigned long long)n, (unsigned long long)split[c][0],
                  (unsigned long long)split[c][1]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%-16s %8llu\n", "total", (unsigned long long)total);
  out << buf;
  if (!m.excluded.empty()) out << "excluded: " << m.excluded.size() << "\n";
  if (!m.errors.empty()) out << "ingestion errors: " << m.errors.size() << "\n";
  return out.str();
}

}  // namespace termeval::corpus
