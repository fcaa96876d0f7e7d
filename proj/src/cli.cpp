#include "termeval/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <toml.hpp>

#include "termeval/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace termeval::cli {

// ---- config -------------------------------------------------------------------

namespace {

// Reads one TOML table and rejects keys nobody asked for.
class Section {
 public:
  Section(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

  bool present() const { return t_ != nullptr; }

  const toml::node* node(const std::string& key) {
    if (!t_) return nullptr;
    used_.insert(key);
    return t_->get(key);
  }

  std::optional<std::int64_t> integer(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_integer()) fail(key, "an integer");
    return n->as_integer()->get();
  }
  std::optional<double> real(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (n->is_integer()) return static_cast<double>(n->as_integer()->get());
    if (!n->is_floating_point()) fail(key, "a number");
    return n->as_floating_point()->get();
  }
  std::optional<std::string> string(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_string()) fail(key, "a string");
    return n->as_string()->get();
  }
  std::optional<std::vector<std::string>> strings(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_array()) fail(key, "an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *n->as_array()) {
      if (!e.is_string()) fail(key, "an array of strings");
      out.push_back(e.as_string()->get());
    }
    return out;
  }
  std::optional<std::vector<std::int64_t>> integers(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_array()) fail(key, "an array of integers");
    std::vector<std::int64_t> out;
    for (const auto& e : *n->as_array()) {
      if (!e.is_integer()) fail(key, "an array of integers");
      out.push_back(e.as_integer()->get());
    }
    return out;
  }
  std::uint64_t positive(const std::string& key, std::uint64_t fallback) {
    auto v = integer(key);
    if (!v) return fallback;
    if (*v <= 0) fail(key, "a positive integer");
    return static_cast<std::uint64_t>(*v);
  }

  void finish() const {
    if (!t_) return;
    for (const auto& [k, _] : *t_)
      if (!used_.count(std::string(k.str())))
        throw UsageError("config: unknown key '" + qualified(std::string(k.str())) + "'");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw UsageError("config: '" + qualified(key) + "' must be " + what);
  }
  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

 private:
  const toml::table* t_;
  std::string name_;
  std::set<std::string> used_;
};

Section section(Section& root, const std::string& key) {
  const toml::node* n = root.node(key);
  if (n && !n->is_table()) root.fail(key, "a table");
  return Section(n ? n->as_table() : nullptr, key);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

oracle::ModelConfig model_from(Section& s, std::size_t index) {
  std::string where = "models[" + std::to_string(index) + "]";
  oracle::ModelConfig m;
  if (auto p = s.string("preset")) {
    auto pre = oracle::preset(*p);
    if (!pre) throw UsageError("config: " + where + ".preset '" + *p + "' is not a known preset");
    m = *pre;
  }
  auto name = s.string("name");
  if (!name) throw UsageError("config: " + where + ".name is required");
  m.name = *name;
  if (auto v = s.string("endpoint")) m.endpoint_url = *v;
  if (auto v = s.string("api_key_env")) m.api_key_env = *v;
  if (auto v = s.string("remote_model")) m.remote_model = *v;
  if (auto v = s.real("top_p")) m.top_p = *v;
  if (const toml::node* n = s.node("temperature")) {
    if (n->is_string() && n->as_string()->get() == "none") m.temperature.reset();
    else if (auto v = s.real("temperature")) m.temperature = *v;
  }
  if (auto v = s.string("reasoning_effort")) {
    if (*v == "none") {
      m.reasoning_effort.reset();
    } else {
      m.reasoning_effort = oracle::reasoning_effort_from_string(*v);
      if (!m.reasoning_effort) s.fail("reasoning_effort", "low, medium, high or none");
    }
  }
  m.max_output_tokens = static_cast<std::uint32_t>(s.positive("max_output_tokens", m.max_output_tokens));
  m.request_timeout = std::chrono::seconds(s.positive("request_timeout", m.request_timeout.count()));
  if (auto v = s.real("requests_per_second")) m.requests_per_second = *v;
  try {
    m.check();
  } catch (const std::invalid_argument& e) {
    throw UsageError("config: " + where + ": " + e.what());
  }
  return m;
}

}  // namespace

RunConfig parse_config(std::string_view toml_text, const fs::path& base_dir) {
  toml::table tbl;
  try {
    tbl = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw UsageError("config: " + std::string(e.description()) + " (line " +
                     std::to_string(e.source().begin.line) + ")");
  }
  RunConfig cfg;
  fs::path base = fs::absolute(base_dir);
  Section root(&tbl, "");

  Section corpus = section(root, "corpus");
  if (auto v = corpus.string("root")) cfg.corpus_root = resolve(base, *v);
  else throw UsageError("config: 'corpus.root' is required");
  if (auto v = corpus.strings("categories")) {
    cfg.categories.clear();
    for (const auto& c : *v) {
      std::string_view name = c;
      if (name.starts_with("Termination-")) name.remove_prefix(12);
      auto cat = corpus::category_from_string(name);
      if (!cat) throw UsageError("config: unknown category '" + c + "'");
      cfg.categories.insert(*cat);
    }
  }
  if (auto v = corpus.string("exclusions")) cfg.exclusions = resolve(base, *v);
  if (auto v = corpus.string("tokens")) cfg.token_sidecar = resolve(base, *v);
  corpus.finish();

  Section output = section(root, "output");
  cfg.output_dir = resolve(base, output.string("dir").value_or("."));
  if (auto v = output.string("run_id")) cfg.run_id = *v;
  output.finish();

  Section ev = section(root, "eval");
  cfg.eval.pool_size = ev.positive("pool_size", cfg.eval.pool_size);
  cfg.eval.n_bootstrap = ev.positive("n_bootstrap", cfg.eval.n_bootstrap);
  cfg.eval.tts_n = ev.positive("tts_n", cfg.eval.tts_n);
  if (auto v = ev.integer("seed")) cfg.eval.rng_seed = static_cast<std::uint64_t>(*v);
  ev.finish();
  try {
    cfg.eval.check();
  } catch (const std::exception& e) {
    throw UsageError(std::string("config: eval: ") + e.what());
  }

  Section chk = section(root, "checker");
  if (auto v = chk.integer("domain_lo")) cfg.checker.domain_lo = *v;
  if (auto v = chk.integer("domain_hi")) cfg.checker.domain_hi = *v;
  cfg.checker.max_assignments = chk.positive("max_assignments", cfg.checker.max_assignments);
  cfg.checker.max_steps = chk.positive("max_steps", cfg.checker.max_steps);
  cfg.checker.bounded_cycle_target = chk.positive("bounded_cycle_target", cfg.checker.bounded_cycle_target);
  chk.finish();
  if (cfg.checker.domain_lo > cfg.checker.domain_hi) throw UsageError("config: checker domain is empty");

  Section val = section(root, "validator");
  if (val.present()) {
    lasso::ValidatorConfig v;
    auto r = val.string("root");
    if (!r) throw UsageError("config: 'validator.root' is required when [validator] is present");
    v.validator_root = resolve(base, *r).string();
    if (auto a = val.string("architecture")) v.architecture = *a;
    if (auto p = val.string("property")) v.property_path = *p;
    v.timeout = std::chrono::seconds(val.positive("timeout", v.timeout.count()));
    cfg.validator = v;
  }
  val.finish();

  Section gen = section(root, "generation");
  if (auto v = gen.string("prompt")) {
    if (*v == "termination") cfg.prompt = PromptKind::Termination;
    else if (*v == "precondition") cfg.prompt = PromptKind::Precondition;
    else gen.fail("prompt", "\"termination\" or \"precondition\"");
  }
  cfg.retry.max_attempts = static_cast<std::uint32_t>(gen.positive("max_attempts", cfg.retry.max_attempts));
  cfg.retry.base_delay = std::chrono::milliseconds(gen.positive("base_delay_ms", cfg.retry.base_delay.count()));
  cfg.retry.max_delay = std::chrono::milliseconds(gen.positive("max_delay_ms", cfg.retry.max_delay.count()));
  gen.finish();

  Section pre = section(root, "precond");
  if (auto v = pre.string("annotations")) cfg.annotations = resolve(base, *v);
  if (auto v = pre.string("semantics")) {
    if (*v == "bitvector") cfg.precond.semantics = precond::Semantics::BitVector;
    else if (*v == "unbounded") cfg.precond.semantics = precond::Semantics::Unbounded;
    else pre.fail("semantics", "\"bitvector\" or \"unbounded\"");
  }
  if (auto v = pre.string("backend")) {
    if (*v == "brute") cfg.precond_backend = precond::Backend::Brute;
    else if (*v == "smt") cfg.precond_backend = precond::Backend::Smt;
    else if (*v == "both") cfg.precond_backend = precond::Backend::Both;
    else pre.fail("backend", "\"brute\", \"smt\" or \"both\"");
  }
  if (auto v = pre.integers("k")) {
    cfg.pass_k.clear();
    for (auto k : *v) {
      if (k <= 0) pre.fail("k", "a list of positive integers");
      cfg.pass_k.push_back(static_cast<std::uint64_t>(k));
    }
  }
  if (auto v = pre.integer("domain_lo")) cfg.precond.domain_lo = *v;
  if (auto v = pre.integer("domain_hi")) cfg.precond.domain_hi = *v;
  cfg.precond.max_assignments = pre.positive("max_assignments", cfg.precond.max_assignments);
  if (auto v = pre.strings("solver")) {
    if (v->empty()) pre.fail("solver", "a non-empty command");
    cfg.precond.solver = *v;
  }
  cfg.precond.solver_timeout =
      std::chrono::milliseconds(pre.positive("solver_timeout_ms", cfg.precond.solver_timeout.count()));
  pre.finish();

  if (const toml::node* n = root.node("models")) {
    if (!n->is_array_of_tables()) root.fail("models", "an array of tables ([[models]])");
    std::size_t i = 0;
    std::set<std::string> names;
    for (const auto& e : *n->as_array()) {
      Section s(e.as_table(), "models[" + std::to_string(i) + "]");
      ModelEntry entry;
      entry.model = model_from(s, i);
      auto mode = s.string("mode").value_or("live");
      if (mode == "live") entry.mode = oracle::Mode::Live;
      else if (mode == "replay") entry.mode = oracle::Mode::Replay;
      else s.fail("mode", "\"live\" or \"replay\"");
      s.finish();
      if (entry.mode == oracle::Mode::Live && entry.model.endpoint_url.empty())
        throw UsageError("config: model '" + entry.model.name + "' is live but has no endpoint");
      if (!names.insert(entry.model.name).second)
        throw UsageError("config: duplicate model name '" + entry.model.name + "'");
      cfg.models.push_back(std::move(entry));
      ++i;
    }
  }
  root.finish();
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path.string());
  } catch (const std::exception& e) {
    throw UsageError("cannot read config " + path.string() + ": " + e.what());
  }
  return parse_config(text, fs::absolute(path).parent_path());
}

// ---- shared helpers -----------------------------------------------------------

namespace {

corpus::CorpusManifest load_corpus(const fs::path& root, const IngestOptions& opts, unsigned jobs) {
  corpus::HeuristicTokenCounter heuristic;
  std::optional<corpus::SidecarTokenCounter> sidecar;
  if (opts.token_sidecar) sidecar = corpus::SidecarTokenCounter::load(*opts.token_sidecar);
  corpus::LoadOptions lo;
  lo.categories = opts.categories;
  if (opts.exclusions) lo.exclusions = corpus::read_exclusions(*opts.exclusions);
  lo.tokens = sidecar ? static_cast<const corpus::TokenCounter*>(&*sidecar) : &heuristic;
  lo.jobs = std::max(jobs, 1u);
  return corpus::load_manifest(root, lo);
}

IngestOptions ingest_options(const RunConfig& cfg) {
  return {cfg.categories, cfg.exclusions, cfg.token_sidecar};
}

std::string now_or(const Context& ctx) { return ctx.clock.empty() ? witness::iso8601_now() : ctx.clock; }

std::vector<std::string> model_names(const RunConfig& cfg, const oracle::RunCache& cache) {
  std::vector<std::string> out;
  for (const auto& m : cfg.models) out.push_back(m.model.name);
  if (out.empty()) out = cache.models();
  return out;
}

void write_output(const fs::path& p, std::string_view content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_file_atomic(p.string(), content);
}

// Runs fn(0..n-1) on up to `jobs` threads; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::size_t t = std::min<std::size_t>(std::max(jobs, 1u), n);
  std::vector<std::thread> threads;
  for (std::size_t i = 1; i < t; ++i) threads.emplace_back(worker);
  worker();
  for (auto& th : threads) th.join();
  if (error) std::rethrow_exception(error);
}

std::string join_ids(const std::vector<witness::WitnessEdge>& edges) {
  std::string out;
  for (const auto& e : edges) out += (out.empty() ? "" : ", ") + e.id.value_or("?");
  return "[" + out + "]";
}

}  // namespace

// ---- ingest -------------------------------------------------------------------

int cmd_ingest(const fs::path& root, const fs::path& out_manifest, const IngestOptions& opts, Context& ctx) {
  corpus::CorpusManifest m;
  try {
    m = load_corpus(root, opts, ctx.jobs);
  } catch (const corpus::ConfigError& e) {
    ctx.err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    ctx.err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  write_output(out_manifest, corpus::manifest_to_json(m).dump(2) + "\n");
  ctx.out << corpus::category_table(m);
  if (!m.excluded.empty()) ctx.out << "excluded: " << m.excluded.size() << "\n";
  if (!m.unlisted.empty()) ctx.out << "unlisted: " << m.unlisted.size() << "\n";
  for (const auto& e : m.errors) ctx.err << "error: " << e.task_id << ": " << e.message << "\n";
  ctx.out << "manifest: " << out_manifest.string() << "\n";
  return m.errors.empty() ? kExitOk : kExitFailure;
}

// ---- run ----------------------------------------------------------------------

int cmd_run(const RunConfig& cfg, Context& ctx) {
  corpus::CorpusManifest m;
  try {
    m = load_corpus(cfg.corpus_root, ingest_options(cfg), ctx.jobs);
  } catch (const std::runtime_error& e) {
    ctx.err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  int status = m.errors.empty() ? kExitOk : kExitFailure;
  for (const auto& e : m.errors) ctx.err << "error: " << e.task_id << ": " << e.message << "\n";

  std::set<std::string> annotated;
  if (cfg.prompt == PromptKind::Precondition && cfg.annotations) {
    json a = json::parse(read_file(cfg.annotations->string()), nullptr, false);
    if (!a.is_object()) {
      ctx.err << "error: annotations file is not a JSON object\n";
      return kExitUsage;
    }
    for (const auto& [k, _] : a.items()) annotated.insert(k);
  }
  std::vector<oracle::TaskPrompt> prompts;
  for (const auto& t : m.tasks) {
    if (cfg.prompt == PromptKind::Termination) {
      prompts.push_back({t.task_id, oracle::build_termination_prompt(t)});
    } else if (annotated.empty() ? t.expected == witness::Verdict::NT : annotated.count(t.task_id) > 0) {
      prompts.push_back({t.task_id, oracle::build_precondition_prompt(t)});
    }
  }

  oracle::RunCache cache(cfg.output_dir, cfg.run_id);
  std::unique_ptr<oracle::Transport> owned;
  oracle::Transport* transport = ctx.transport;
  std::map<std::string, std::shared_ptr<oracle::RateLimiter>> limiters;
  for (const auto& entry : cfg.models) {
    const auto& model = entry.model;
    std::unique_ptr<oracle::ChatClient> client;
    if (entry.mode == oracle::Mode::Live) {
      if (!transport) {
        owned = oracle::make_http_transport();
        transport = owned.get();
      }
      auto& limiter = limiters[model.endpoint_url];
      if (!limiter && model.requests_per_second > 0)
        limiter = std::make_shared<oracle::RateLimiter>(model.requests_per_second);
      try {
        client = std::make_unique<oracle::ChatClient>(model, *transport, ctx.retry.value_or(cfg.retry), limiter);
      } catch (const oracle::AuthError& e) {
        ctx.err << "error: " << e.what() << "\n";
        status = kExitFailure;
        continue;
      }
    }
    oracle::GenerateOptions opts;
    opts.n = static_cast<std::uint32_t>(cfg.eval.pool_size);
    opts.mode = entry.mode;
    opts.jobs = std::max(ctx.jobs, 1u);
    if (!ctx.clock.empty()) opts.clock = [c = ctx.clock] { return c; };
    oracle::GenerateResult res;
    try {
      res = oracle::generate(model.name, client.get(), cache, prompts, opts);
    } catch (const oracle::AuthError& e) {
      ctx.err << "error: " << e.what() << "\n";
      status = kExitFailure;
      continue;
    }
    std::size_t tool_errors = 0;
    for (const auto& r : res.records) {
      if (!r.tool_error) continue;
      ++tool_errors;
      ctx.err << "warning: " << model.name << " " << r.task_id << " #" << r.sample_index << ": "
              << *r.tool_error << "\n";
    }
    for (const auto& [task, i] : res.missing)
      ctx.err << "error: " << model.name << " " << task << " #" << i << " is not in the cache\n";
    ctx.out << model.name << ": " << res.records.size() << " records, " << res.requests << " requested, "
            << tool_errors << " tool errors, " << res.missing.size() << " missing\n";
    if (tool_errors || !res.missing.empty()) status = kExitFailure;
  }
  ctx.out << "run: " << cache.run_dir().string() << "\n";
  return status;
}

// ---- check-witness ------------------------------------------------------------

int cmd_check_witness(const fs::path& program, const fs::path& witness_json, const CheckWitnessOptions& opts,
                      Context& ctx) {
  std::string source, text;
  try {
    source = read_file(program.string());
    text = read_file(witness_json.string());
  } catch (const std::exception& e) {
    ctx.err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::optional<witness::WitnessAutomaton> w;
  std::vector<std::string> type_errors;
  json j = json::parse(text, nullptr, false);
  if (!j.is_discarded() && j.is_object() && j.contains("witness")) {
    w = witness::witness_from_json(j["witness"], type_errors);
  } else if (!j.is_discarded() && j.is_object() && (j.contains("nodes") || j.contains("edges"))) {
    w = witness::witness_from_json(j, type_errors);
  } else {
    auto p = witness::parse_prediction(text);
    if (auto* pred = std::get_if<witness::Prediction>(&p); pred && pred->witness) {
      w = pred->witness;
      type_errors = pred->witness_errors;
    }
  }
  if (!w) {
    ctx.out << "witness: none found\n";
    return kExitFailure;
  }
  for (const auto& e : type_errors) ctx.out << "witness: " << e << "\n";

  int lines = static_cast<int>(split_lines(source).size());
  auto violations = witness::validate_schema(*w, lines);
  for (const auto& v : violations) ctx.out << "schema: " << v.to_string() << "\n";
  if (!violations.empty()) return kExitFailure;
  ctx.out << "schema: ok\n";

  auto lasso_or = lasso::extract_lasso(*w);
  if (auto* no = std::get_if<lasso::NoLasso>(&lasso_or)) {
    ctx.out << "lasso: none (" << no->reason << ")\n";
    return kExitFailure;
  }
  const auto& path = std::get<lasso::LassoPath>(lasso_or);
  ctx.out << "lasso: stem " << join_ids(path.stem) << " cycle " << join_ids(path.cycle) << "\n";

  int status = kExitFailure;
  try {
    auto parsed = cparse::parse_program(source);
    if (auto* u = std::get_if<cparse::UnsupportedConstruct>(&parsed)) {
      ctx.out << "internal: skipped, unsupported construct '" << u->construct << "' at line " << u->line << "\n";
    } else {
      auto result = lasso::check_feasibility(parsed, path, opts.checker);
      ctx.out << "internal: " << lasso::describe(result) << "\n";
      if (std::holds_alternative<lasso::ProvenInfinite>(result) ||
          std::holds_alternative<lasso::BoundedEvidence>(result))
        status = kExitOk;
    }
  } catch (const cparse::ParseError& e) {
    ctx.out << "internal: skipped, program does not parse (" << e.what() << ")\n";
  }

  std::optional<fs::path> graphml_path = opts.emit;
  std::optional<fs::path> temp;
  if (!graphml_path && opts.validator) {
    temp = fs::temp_directory_path() / ("termeval_witness_" + std::to_string(::getpid()) + ".graphml");
    graphml_path = temp;
  }
  if (graphml_path) {
    witness::ProgramInfo info{program.string(), source, opts.architecture};
    witness::ProducerMeta meta;
    meta.creationtime = now_or(ctx);
    write_output(*graphml_path, witness::emit_graphml(*w, info, meta));
    if (opts.emit) ctx.out << "graphml: " << opts.emit->string() << "\n";
  }
  if (opts.validator) {
    lasso::ValidatorConfig v = *opts.validator;
    v.architecture = opts.architecture;
    auto r = lasso::run_external_validator(fs::absolute(program).string(), fs::absolute(*graphml_path).string(), v);
    if (std::holds_alternative<lasso::Validated>(r)) {
      ctx.out << "validator: validated\n";
      status = kExitOk;
    } else if (std::holds_alternative<lasso::Rejected>(r)) {
      ctx.out << "validator: rejected\n";
      status = kExitFailure;
    } else {
      ctx.out << "validator: tool error\n" << std::get<lasso::ToolError>(r).output << "\n";
      status = kExitFailure;
    }
  }
  if (temp) fs::remove(*temp);
  return status;
}

// ---- judging ------------------------------------------------------------------

Judge::Judge(const RunConfig& cfg, fs::path scratch) : cfg_(cfg), scratch_(std::move(scratch)) {}

std::string Judge::checker_mode() const { return cfg_.validator ? "external-validator" : "internal-checker"; }

eval::Generation Judge::operator()(const corpus::TaskSpec& task, const oracle::GenerationRecord& r) {
  const auto* pred = std::get_if<witness::Prediction>(&r.parsed);
  if (!pred) return {witness::Verdict::UNK, eval::WitnessStatus::Absent};
  if (pred->verdict != witness::Verdict::NT) return {pred->verdict, eval::WitnessStatus::Absent};
  if (!pred->witness || !pred->witness_errors.empty())
    return {witness::Verdict::NT, eval::WitnessStatus::Invalid};

  auto key = std::make_pair(task.task_id, witness::witness_to_json(*pred->witness).dump());
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(key); it != memo_.end()) return {witness::Verdict::NT, it->second};
  }
  eval::WitnessStatus s = check(task, *pred->witness);
  std::lock_guard lock(mu_);
  memo_.emplace(std::move(key), s);
  return {witness::Verdict::NT, s};
}

eval::WitnessStatus Judge::check(const corpus::TaskSpec& task, const witness::WitnessAutomaton& w) {
  using eval::WitnessStatus;
  int lines = static_cast<int>(split_lines(task.source).size());
  if (!witness::validate_schema(w, lines).empty()) return WitnessStatus::Invalid;

  if (cfg_.validator) {
    witness::ProgramInfo info{task.source_path.string(), task.source, std::string(corpus::to_string(task.architecture))};
    witness::ProducerMeta meta;
    meta.creationtime = "1970-01-01T00:00:00Z";
    std::uint64_t id;
    {
      std::lock_guard lock(mu_);
      id = graphml_counter_++;
    }
    fs::path g = scratch_ / (std::to_string(id) + ".graphml");
    write_output(g, witness::emit_graphml(w, info, meta));
    lasso::ValidatorConfig v = *cfg_.validator;
    v.architecture = std::string(corpus::to_string(task.architecture));
    auto r = lasso::run_external_validator(task.source_path.string(), g.string(), v);
    return std::holds_alternative<lasso::Validated>(r) ? WitnessStatus::Valid : WitnessStatus::Invalid;
  }

  auto lasso_or = lasso::extract_lasso(w);
  if (!std::holds_alternative<lasso::LassoPath>(lasso_or)) return WitnessStatus::Invalid;

  std::shared_ptr<const cparse::ParseResult> program;
  {
    std::lock_guard lock(mu_);
    if (auto it = programs_.find(task.task_id); it != programs_.end()) program = it->second;
  }
  if (!program) {
    try {
      program = std::make_shared<const cparse::ParseResult>(cparse::parse_program(task.source));
    } catch (const cparse::ParseError&) {
      return WitnessStatus::Invalid;
    }
    std::lock_guard lock(mu_);
    programs_.emplace(task.task_id, program);
  }
  if (std::holds_alternative<cparse::UnsupportedConstruct>(*program)) return WitnessStatus::Invalid;
  auto result = lasso::check_feasibility(*program, std::get<lasso::LassoPath>(lasso_or), cfg_.checker);
  return std::holds_alternative<lasso::ProvenInfinite>(result) ||
                 std::holds_alternative<lasso::BoundedEvidence>(result)
             ? WitnessStatus::Valid
             : WitnessStatus::Invalid;
}

// ---- score --------------------------------------------------------------------

namespace {

// Records for every task of one model, or the list of incomplete tasks.
struct Pools {
  std::vector<std::vector<oracle::GenerationRecord>> records;  // parallel to manifest tasks
  std::vector<std::string> incomplete;
};

Pools load_pools(const oracle::RunCache& cache, const std::string& model,
                 const std::vector<const corpus::TaskSpec*>& tasks, std::size_t n) {
  Pools p;
  for (const auto* t : tasks) {
    std::vector<oracle::GenerationRecord> recs;
    for (std::uint32_t i = 0; i < n; ++i)
      if (auto r = cache.load(model, t->task_id, i)) recs.push_back(std::move(*r));
    if (recs.size() != n)
      p.incomplete.push_back(t->task_id + " (" + std::to_string(recs.size()) + " of " + std::to_string(n) + ")");
    p.records.push_back(std::move(recs));
  }
  return p;
}

}  // namespace

int cmd_score(const RunConfig& cfg, const fs::path& out_dir, Context& ctx) {
  corpus::CorpusManifest m;
  try {
    m = load_corpus(cfg.corpus_root, ingest_options(cfg), ctx.jobs);
  } catch (const std::runtime_error& e) {
    ctx.err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  for (const auto& e : m.errors) ctx.err << "warning: not scored: " << e.task_id << ": " << e.message << "\n";
  if (m.tasks.empty()) {
    ctx.err << "error: the corpus has no tasks\n";
    return kExitFailure;
  }

  oracle::RunCache cache(cfg.output_dir, cfg.run_id);
  auto models = model_names(cfg, cache);
  if (models.empty()) {
    ctx.err << "error: no models to score in " << cache.run_dir().string() << "\n";
    return kExitFailure;
  }
  std::vector<const corpus::TaskSpec*> tasks;
  for (const auto& t : m.tasks) tasks.push_back(&t);
  std::map<std::string, int> bins;
  if (m.tasks.size() >= 3) bins = corpus::assign_length_bins(m).assignment;

  fs::path scratch = fs::temp_directory_path() / ("termeval_graphml_" + std::to_string(::getpid()));
  Judge judge(cfg, scratch);
  eval::EvalReport report;
  report.config = cfg.eval;
  report.generated_at = now_or(ctx);
  int status = kExitOk;
  for (const auto& model : models) {
    Pools p = load_pools(cache, model, tasks, cfg.eval.pool_size);
    if (!p.incomplete.empty()) {
      ctx.err << "error: " << model << ": incomplete pools for " << p.incomplete.size() << " tasks:\n";
      for (const auto& s : p.incomplete) ctx.err << "  " << s << "\n";
      status = kExitFailure;
      continue;
    }
    std::vector<eval::TaskPool> pools(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      pools[i].task_id = tasks[i]->task_id;
      pools[i].category = std::string(corpus::to_string(tasks[i]->category));
      pools[i].expected = tasks[i]->expected;
      pools[i].pool.resize(cfg.eval.pool_size);
    }
    std::size_t n = cfg.eval.pool_size;
    parallel_for(tasks.size() * n, ctx.jobs, [&](std::size_t k) {
      std::size_t t = k / n, s = k % n;
      pools[t].pool[s] = judge(*tasks[t], p.records[t][s]);
    });
    report.models.push_back(eval::evaluate_model(model, pools, cfg.eval, bins, judge.checker_mode()));
  }
  std::error_code ec;
  fs::remove_all(scratch, ec);
  if (status != kExitOk) return status;

  write_output(out_dir / "report.json", eval::to_json(report).dump(2) + "\n");
  std::string text = eval::to_text(report);
  write_output(out_dir / "report.txt", text);
  write_output(out_dir / "runs.csv", eval::per_run_csv(report));
  ctx.out << text;
  return kExitOk;
}

// ---- precond ------------------------------------------------------------------

std::vector<precond::Variable> parse_variable_list(const std::string& spec) {
  static const std::map<std::string, cint::IntType> kTypes = {
      {"char", cint::kChar},   {"short", cint::kShort}, {"int", cint::kInt},
      {"long", cint::kLong},   {"uint", cint::kUInt},   {"unsigned", cint::kUInt},
      {"bool", cint::kBool},   {"uchar", cint::kUChar}, {"ushort", cint::kUShort},
      {"ulong", cint::kULong},
  };
  std::vector<precond::Variable> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    std::string name = item.substr(0, colon);
    std::string type = colon == std::string::npos ? "int" : item.substr(colon + 1);
    auto it = kTypes.find(type);
    if (name.empty() || it == kTypes.end()) throw UsageError("bad variable '" + item + "' (expected name:type)");
    out.push_back({name, it->second});
  }
  if (out.empty()) throw UsageError("empty variable list");
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string result_name(const precond::EquivalenceResult& r) {
  if (std::holds_alternative<precond::Equivalent>(r)) return "equivalent";
  if (std::holds_alternative<precond::Inequivalent>(r)) return "inequivalent";
  return "unknown";
}

struct Annotation {
  std::string task_id;
  std::string text;
  precond::ExprPtr expr;
  std::vector<precond::Variable> vars;
};

std::vector<precond::Variable> nondet_variables(const corpus::TaskSpec& task) {
  std::vector<precond::Variable> out;
  try {
    auto parsed = cparse::parse_program(task.source);
    if (const auto* p = std::get_if<cparse::Program>(&parsed)) {
      for (const auto& v : p->nondet_vars) {
        if (v.variable.find('@') != std::string::npos) continue;
        if (std::none_of(out.begin(), out.end(), [&](const auto& o) { return o.name == v.variable; }))
          out.push_back({v.variable, v.type});
      }
    }
  } catch (const cparse::ParseError&) {
  }
  return out;
}

}  // namespace

int cmd_precond(const RunConfig& cfg, const fs::path& out_dir, Context& ctx) {
  if (!cfg.annotations) {
    ctx.err << "error: precond needs 'precond.annotations' in the config\n";
    return kExitUsage;
  }
  json a = json::parse(read_file(cfg.annotations->string()), nullptr, false);
  if (!a.is_object()) {
    ctx.err << "error: " << cfg.annotations->string() << " is not a JSON object\n";
    return kExitUsage;
  }
  corpus::CorpusManifest m;
  try {
    m = load_corpus(cfg.corpus_root, ingest_options(cfg), ctx.jobs);
  } catch (const std::runtime_error& e) {
    ctx.err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::vector<Annotation> annotations;
  for (const auto& [id, value] : a.items()) {
    Annotation an;
    an.task_id = id;
    const corpus::TaskSpec* task = m.find(id);
    if (!task) {
      ctx.err << "error: annotated task " << id << " is not in the corpus\n";
      return kExitUsage;
    }
    if (value.is_string()) {
      an.text = value.get<std::string>();
    } else if (value.is_object() && value.contains("precondition") && value["precondition"].is_string()) {
      an.text = value["precondition"].get<std::string>();
      if (value.contains("variables")) {
        try {
          an.vars = parse_variable_list(value["variables"].get<std::string>());
        } catch (const std::exception& e) {
          ctx.err << "error: annotation " << id << ": " << e.what() << "\n";
          return kExitUsage;
        }
      }
    } else {
      ctx.err << "error: annotation " << id << " must be a string or {\"precondition\": ...}\n";
      return kExitUsage;
    }
    if (an.vars.empty()) an.vars = nondet_variables(*task);
    auto parsed = precond::parse_precondition(an.text, an.vars.empty() ? nullptr : &an.vars);
    if (auto* e = std::get_if<precond::ParseError>(&parsed)) {
      ctx.err << "error: ground truth for " << id << " does not parse at " << e->position << ": " << e->message
              << "\n";
      return kExitUsage;
    }
    an.expr = std::get<precond::ExprPtr>(parsed);
    if (an.vars.empty())
      for (const auto& name : precond::variables_of(*an.expr)) an.vars.push_back({name, cint::kInt});
    annotations.push_back(std::move(an));
  }
  for (auto k : cfg.pass_k)
    if (k > cfg.eval.pool_size) {
      ctx.err << "error: pass@" << k << " needs at least " << k << " generations per task\n";
      return kExitUsage;
    }

  oracle::RunCache cache(cfg.output_dir, cfg.run_id);
  auto models = model_names(cfg, cache);
  json out = json::object();
  out["generated_at"] = now_or(ctx);
  out["k"] = cfg.pass_k;
  out["models"] = json::array();
  int status = kExitOk;
  std::ostringstream text;
  for (const auto& model : models) {
    std::vector<const corpus::TaskSpec*> tasks;
    for (const auto& an : annotations) tasks.push_back(m.find(an.task_id));
    Pools p = load_pools(cache, model, tasks, cfg.eval.pool_size);
    if (!p.incomplete.empty()) {
      ctx.err << "error: " << model << ": incomplete pools for " << p.incomplete.size() << " tasks:\n";
      for (const auto& s : p.incomplete) ctx.err << "  " << s << "\n";
      status = kExitFailure;
      continue;
    }
    std::vector<precond::PassAtKResult> results(annotations.size());
    std::vector<std::vector<std::string>> answers(annotations.size());
    parallel_for(annotations.size(), ctx.jobs, [&](std::size_t i) {
      for (const auto& r : p.records[i]) answers[i].push_back(r.tool_error ? "" : precond::extract_answer(r.raw_text));
      results[i] = precond::precondition_pass_at_k(answers[i], *annotations[i].expr, annotations[i].vars, 1,
                                                   cfg.precond_backend, cfg.precond);
    });

    json jm;
    jm["model"] = model;
    jm["tasks"] = json::array();
    std::vector<double> sums(cfg.pass_k.size(), 0.0);
    text << model << "\n";
    for (std::size_t i = 0; i < annotations.size(); ++i) {
      const auto& r = results[i];
      json jt;
      jt["task_id"] = annotations[i].task_id;
      jt["ground_truth"] = annotations[i].text;
      jt["n"] = r.n;
      jt["c"] = r.c;
      text << "  " << annotations[i].task_id << "  c=" << r.c << "/" << r.n;
      for (std::size_t j = 0; j < cfg.pass_k.size(); ++j) {
        double v = eval::pass_at_k(r.n, r.c, cfg.pass_k[j]);
        sums[j] += v;
        jt["pass@" + std::to_string(cfg.pass_k[j])] = v;
        text << "  pass@" << cfg.pass_k[j] << " " << fmt(v);
      }
      text << "\n";
      jt["generations"] = json::array();
      for (std::size_t g = 0; g < r.per_generation.size(); ++g) {
        json jg{{"answer", answers[i][g]}, {"result", result_name(r.per_generation[g])},
                {"detail", precond::describe(r.per_generation[g])}};
        jt["generations"].push_back(jg);
      }
      jm["tasks"].push_back(jt);
    }
    text << "  mean";
    for (std::size_t j = 0; j < cfg.pass_k.size(); ++j) {
      double mean = annotations.empty() ? 0.0 : sums[j] / static_cast<double>(annotations.size());
      jm["mean"]["pass@" + std::to_string(cfg.pass_k[j])] = mean;
      text << "  pass@" << cfg.pass_k[j] << " " << fmt(mean);
    }
    text << "\n";
    out["models"].push_back(jm);
  }
  if (status != kExitOk) return status;
  write_output(out_dir / "precond.json", out.dump(2) + "\n");
  ctx.out << text.str();
  return kExitOk;
}

int cmd_precond_pair(const std::string& a, const std::string& b, const std::vector<precond::Variable>& vars,
                     precond::Backend backend, const precond::EquivalenceConfig& cfg, Context& ctx) {
  precond::ExprPtr ea, eb;
  for (auto [text, slot] : {std::pair{&a, &ea}, std::pair{&b, &eb}}) {
    auto parsed = precond::parse_precondition(*text, &vars);
    if (auto* e = std::get_if<precond::ParseError>(&parsed)) {
      ctx.err << "error: '" << *text << "' does not parse at " << e->position << ": " << e->message << "\n";
      return kExitUsage;
    }
    *slot = std::get<precond::ExprPtr>(parsed);
  }
  auto r = precond::check_equivalence(*ea, *eb, vars, backend, cfg);
  ctx.out << precond::describe(r) << "\n";
  return std::holds_alternative<precond::Equivalent>(r) ? kExitOk : kExitFailure;
}

}  // namespace termeval::cli
