#include "termeval/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

#include "prompt_resources.hpp"
#include "termeval/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace termeval::oracle {

std::string_view to_string(ReasoningEffort e) {
  switch (e) {
    case ReasoningEffort::Low: return "low";
    case ReasoningEffort::Medium: return "medium";
    case ReasoningEffort::High: return "high";
  }
  return "?";
}

std::optional<ReasoningEffort> reasoning_effort_from_string(std::string_view s) {
  for (auto e : {ReasoningEffort::Low, ReasoningEffort::Medium, ReasoningEffort::High})
    if (to_string(e) == s) return e;
  return std::nullopt;
}

namespace {

bool safe_component(std::string_view s) {
  return !s.empty() && s != "." && s != ".." && s.find('/') == std::string_view::npos &&
         s.find('\\') == std::string_view::npos && s.find('\0') == std::string_view::npos;
}

bool safe_relative_path(std::string_view s) {
  if (s.empty() || s.front() == '/') return false;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find('/', start);
    if (end == std::string_view::npos) end = s.size();
    if (!safe_component(s.substr(start, end - start))) return false;
    start = end + 1;
  }
  return true;
}

}  // namespace

void ModelConfig::check() const {
  if (!safe_component(name)) throw std::invalid_argument("model name must be a plain file name: '" + name + "'");
  if (!(top_p > 0 && top_p <= 1)) throw std::invalid_argument("top_p must lie in (0, 1]");
  if (temperature && !(*temperature >= 0)) throw std::invalid_argument("temperature must be >= 0");
  if (max_output_tokens == 0) throw std::invalid_argument("max_output_tokens must be positive");
  if (request_timeout.count() <= 0) throw std::invalid_argument("request_timeout must be positive");
  if (requests_per_second < 0) throw std::invalid_argument("requests_per_second must be >= 0");
}

std::vector<std::string> preset_names() {
  return {"reasoning-medium", "temp-0.6", "temp-0.7", "temp-1.0"};
}

std::optional<ModelConfig> preset(std::string_view name) {
  ModelConfig m;
  m.name = std::string(name);
  m.top_p = 0.95;
  if (name == "temp-1.0") m.temperature = 1.0;
  else if (name == "temp-0.6") m.temperature = 0.6;
  else if (name == "temp-0.7") m.temperature = 0.7;
  else if (name == "reasoning-medium") m.reasoning_effort = ReasoningEffort::Medium;
  else return std::nullopt;
  return m;
}

// ---- prompts ------------------------------------------------------------------

std::vector<std::string> prompt_resource_names() {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < detail::kPromptResourceCount; ++i)
    out.emplace_back(detail::kPromptResources[i].name);
  return out;
}

std::string_view prompt_resource(std::string_view name) {
  for (std::size_t i = 0; i < detail::kPromptResourceCount; ++i)
    if (name == detail::kPromptResources[i].name) return detail::kPromptResources[i].text;
  throw std::out_of_range("no prompt resource " + std::string(name));
}

namespace {

std::string fill(std::string_view frame, const std::vector<std::pair<std::string, std::string_view>>& slots) {
  std::string out;
  std::size_t pos = 0;
  while (pos < frame.size()) {
    std::size_t open = frame.find("{{", pos);
    if (open == std::string_view::npos) break;
    std::size_t close = frame.find("}}", open);
    if (close == std::string_view::npos) break;
    std::string_view key = frame.substr(open + 2, close - open - 2);
    auto it = std::find_if(slots.begin(), slots.end(), [&](const auto& s) { return s.first == key; });
    if (it == slots.end()) throw std::logic_error("prompt frame has unknown slot " + std::string(key));
    out.append(frame.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 2;
  }
  out.append(frame.substr(pos));
  return out;
}

}  // namespace

std::string build_termination_prompt(const corpus::TaskSpec& task) {
  if (task.numbered_source.empty() && !task.source.empty())
    throw std::invalid_argument("task " + task.task_id + " has no numbered source");
  return fill(prompt_resource("termination_frame.txt"),
              {{"instructions", prompt_resource("termination_instructions.txt")},
               {"examples", prompt_resource("termination_examples.txt")},
               {"program", task.numbered_source}});
}

std::string build_precondition_prompt(const corpus::TaskSpec& task) {
  return fill(prompt_resource("precondition_frame.txt"),
              {{"instructions", prompt_resource("precondition.txt")}, {"program", task.source}});
}

std::string prompt_hash(std::string_view prompt) { return sha256_hex(prompt); }

// ---- records ------------------------------------------------------------------

void GenerationRecord::parse() {
  if (tool_error) {
    parsed = witness::FormatError{"tool error: " + *tool_error};
    return;
  }
  parsed = witness::parse_prediction(raw_text);
}

json record_to_json(const GenerationRecord& r) {
  json j;
  j["task_id"] = r.task_id;
  j["model"] = r.model;
  j["sample_index"] = r.sample_index;
  j["prompt_hash"] = r.prompt_hash;
  j["raw_text"] = r.raw_text;
  j["tool_error"] = r.tool_error ? json(*r.tool_error) : json(nullptr);
  j["request_params"] = r.request_params;
  j["attempts"] = r.attempts;
  j["latency"] = r.latency;
  j["timestamp"] = r.timestamp;
  return j;
}

GenerationRecord record_from_json(const json& j) {
  GenerationRecord r;
  try {
    r.task_id = j.at("task_id").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.sample_index = j.at("sample_index").get<std::uint32_t>();
    r.prompt_hash = j.value("prompt_hash", "");
    r.raw_text = j.at("raw_text").get<std::string>();
    if (j.contains("tool_error") && !j["tool_error"].is_null())
      r.tool_error = j["tool_error"].get<std::string>();
    r.request_params = j.value("request_params", json::object());
    r.attempts = j.value("attempts", 0u);
    r.latency = j.value("latency", 0.0);
    r.timestamp = j.value("timestamp", "");
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed generation record: ") + e.what());
  }
  r.parse();
  return r;
}

// ---- cache --------------------------------------------------------------------

RunCache::RunCache(fs::path root, std::string run_id) : root_(std::move(root)), run_id_(std::move(run_id)) {
  if (!safe_component(run_id_)) throw std::invalid_argument("run id must be a plain file name: '" + run_id_ + "'");
}

fs::path RunCache::path(std::string_view model, std::string_view task_id, std::uint32_t sample_index) const {
  if (!safe_component(model)) throw std::invalid_argument("bad model name '" + std::string(model) + "'");
  if (!safe_relative_path(task_id)) throw std::invalid_argument("bad task id '" + std::string(task_id) + "'");
  return run_dir() / fs::path(model) / fs::path(task_id) / (std::to_string(sample_index) + ".json");
}

std::optional<GenerationRecord> RunCache::load(std::string_view model, std::string_view task_id,
                                               std::uint32_t sample_index) const {
  fs::path p = path(model, task_id, sample_index);
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) return std::nullopt;
  json j;
  try {
    j = json::parse(read_file(p.string()));
  } catch (const json::exception& e) {
    throw std::runtime_error(p.string() + ": " + e.what());
  }
  GenerationRecord r = record_from_json(j);
  if (r.model != model || r.task_id != task_id || r.sample_index != sample_index)
    throw std::runtime_error(p.string() + ": record identity does not match its path");
  return r;
}

void RunCache::store(const GenerationRecord& r) const {
  fs::path p = path(r.model, r.task_id, r.sample_index);
  if (auto existing = load(r.model, r.task_id, r.sample_index); existing && !existing->tool_error) return;
  fs::create_directories(p.parent_path());
  write_file_atomic(p.string(), record_to_json(r).dump(2) + "\n");
}

std::vector<std::string> RunCache::models() const {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(run_dir(), ec))
    if (e.is_directory()) out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

// ---- client -------------------------------------------------------------------

RateLimiter::RateLimiter(double per_second)
    : interval_(per_second > 0 ? std::chrono::nanoseconds(static_cast<std::int64_t>(1e9 / per_second))
                               : std::chrono::nanoseconds(0)),
      next_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (interval_.count() == 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mu_);
    slot = std::max(next_, std::chrono::steady_clock::now());
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

std::chrono::milliseconds RetryPolicy::delay_after(std::uint32_t attempt) const {
  double d = static_cast<double>(base_delay.count()) * std::pow(multiplier, attempt - 1.0);
  d = std::min(d, static_cast<double>(max_delay.count()));
  return std::chrono::milliseconds(static_cast<std::int64_t>(d));
}

ChatClient::ChatClient(ModelConfig model, Transport& transport, RetryPolicy retry,
                       std::shared_ptr<RateLimiter> limiter, Sleeper sleeper)
    : model_(std::move(model)),
      transport_(transport),
      retry_(retry),
      limiter_(std::move(limiter)),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })) {
  model_.check();
  if (retry_.max_attempts == 0) throw std::invalid_argument("max_attempts must be positive");
  if (!model_.api_key_env.empty()) {
    const char* key = std::getenv(model_.api_key_env.c_str());
    if (!key || !*key) throw AuthError("model " + model_.name + ": environment variable " + model_.api_key_env + " is not set");
    api_key_ = key;
  }
}

json ChatClient::request_body(const std::string& prompt, bool with_temperature) const {
  json body;
  body["model"] = model_.wire_model();
  body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
  body["top_p"] = model_.top_p;
  body["max_tokens"] = model_.max_output_tokens;
  if (with_temperature && model_.temperature) body["temperature"] = *model_.temperature;
  if (model_.reasoning_effort) body["reasoning_effort"] = to_string(*model_.reasoning_effort);
  return body;
}

std::optional<std::string> extract_content(std::string_view response_body, std::string* error) {
  auto fail = [&](std::string msg) -> std::optional<std::string> {
    if (error) *error = std::move(msg);
    return std::nullopt;
  };
  json j = json::parse(response_body, nullptr, false);
  if (j.is_discarded()) return fail("response is not JSON");
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    return fail("response has no choices");
  const json& choice = j["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object())
    return fail("choice has no message");
  const json& msg = choice["message"];
  if (!msg.contains("content") || msg["content"].is_null()) return std::string();
  if (!msg["content"].is_string()) return fail("message content is not a string");
  return msg["content"].get<std::string>();
}

namespace {

bool transient(const HttpResponse& r) {
  return r.status == 0 || r.status == 408 || r.status == 429 || r.status >= 500;
}

std::string snippet(std::string_view s) {
  constexpr std::size_t kMax = 300;
  return std::string(s.substr(0, kMax)) + (s.size() > kMax ? "..." : "");
}

bool rejects_temperature(const HttpResponse& r) {
  if (r.status != 400 && r.status != 422) return false;
  std::string lower = r.body;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower.find("temperature") != std::string::npos;
}

}  // namespace

Completion ChatClient::complete(const std::string& prompt) {
  Completion out;
  auto start = std::chrono::steady_clock::now();
  bool with_temp = model_.temperature.has_value() && !drop_temperature_;
  bool resent_without_temp = false;
  std::uint32_t failures = 0;
  std::vector<std::pair<std::string, std::string>> headers;
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
  auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(model_.request_timeout);

  for (;;) {
    if (limiter_) limiter_->acquire();
    json body = request_body(prompt, with_temp);
    out.request_params = body;
    out.request_params.erase("messages");
    ++out.attempts;
    HttpResponse r = transport_.post(model_.endpoint_url, headers, body.dump(), timeout);

    if (r.status == 200) {
      std::string err;
      if (auto text = extract_content(r.body, &err)) {
        out.text = std::move(text);
        break;
      }
      r.status = 0;
      r.error = "bad response body: " + err;
    }
    if (r.status == 401 || r.status == 403)
      throw AuthError("model " + model_.name + ": HTTP " + std::to_string(r.status) + ": " + snippet(r.body));
    if (with_temp && !resent_without_temp && rejects_temperature(r)) {
      drop_temperature_ = true;
      with_temp = false;
      resent_without_temp = true;
      continue;
    }
    std::string what = r.status == 0 ? r.error : "HTTP " + std::to_string(r.status) + ": " + snippet(r.body);
    if (!transient(r)) {
      out.error = what;
      break;
    }
    ++failures;
    if (failures >= retry_.max_attempts) {
      out.error = "gave up after " + std::to_string(failures) + " attempts: " + what;
      break;
    }
    sleeper_(retry_.delay_after(failures));
  }
  out.latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// ---- generation ---------------------------------------------------------------

GenerateResult generate(const std::string& model, ChatClient* client, const RunCache& cache,
                        const std::vector<TaskPrompt>& tasks, const GenerateOptions& opts) {
  if (opts.mode == Mode::Live && !client) throw std::invalid_argument("live generation needs a client");
  auto clock = opts.clock ? opts.clock : [] { return witness::iso8601_now(); };

  GenerateResult result;
  struct Job {
    const TaskPrompt* task;
    std::uint32_t index;
  };
  std::vector<Job> todo;
  for (const auto& t : tasks) {
    for (std::uint32_t i = 0; i < opts.n; ++i) {
      auto rec = cache.load(model, t.task_id, i);
      if (rec && !(opts.mode == Mode::Live && rec->tool_error)) {
        result.records.push_back(std::move(*rec));
      } else if (opts.mode == Mode::Replay) {
        if (rec) result.records.push_back(std::move(*rec));
        else result.missing.emplace_back(t.task_id, i);
      } else {
        todo.push_back({&t, i});
      }
    }
  }

  std::vector<GenerationRecord> fresh(todo.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      std::size_t k = next++;
      if (k >= todo.size() || stop) return;
      const Job& job = todo[k];
      try {
        Completion c = client->complete(job.task->prompt);
        GenerationRecord& r = fresh[k];
        r.task_id = job.task->task_id;
        r.model = model;
        r.sample_index = job.index;
        r.prompt_hash = prompt_hash(job.task->prompt);
        r.raw_text = c.text.value_or("");
        if (!c.text) r.tool_error = c.error;
        r.request_params = c.request_params;
        r.attempts = c.attempts;
        r.latency = c.latency;
        r.timestamp = clock();
        cache.store(r);
        r.parse();
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        stop = true;
        return;
      }
    }
  };
  std::size_t n_threads = std::min<std::size_t>(std::max<std::uint32_t>(opts.jobs, 1), todo.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);

  result.requests = todo.size();
  for (auto& r : fresh) result.records.push_back(std::move(r));
  std::sort(result.records.begin(), result.records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.task_id, a.sample_index) < std::tie(b.task_id, b.sample_index);
  });
  return result;
}

}  // namespace termeval::oracle
