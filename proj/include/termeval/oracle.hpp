#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "termeval/corpus.hpp"
#include "termeval/witness.hpp"

namespace termeval::oracle {

enum class ReasoningEffort { Low, Medium, High };
std::string_view to_string(ReasoningEffort e);
std::optional<ReasoningEffort> reasoning_effort_from_string(std::string_view s);

struct ModelConfig {
  std::string name;          // cache directory name and default wire model
  std::string remote_model;  // value of the request's "model" field; empty means name
  std::string endpoint_url;  // full chat-completions URL
  std::string api_key_env;   // empty: no Authorization header
  double top_p = 0.95;
  std::optional<double> temperature;
  std::optional<ReasoningEffort> reasoning_effort;
  std::uint32_t max_output_tokens = 16384;
  std::chrono::seconds request_timeout{600};
  double requests_per_second = 0;  // 0: unlimited

  /// Throws std::invalid_argument naming the offending field.
  void check() const;
  const std::string& wire_model() const { return remote_model.empty() ? name : remote_model; }
};

/// Sampling profiles: "temp-1.0", "temp-0.6", "temp-0.7" and
/// "reasoning-medium" (no temperature). All use top_p 0.95.
std::vector<std::string> preset_names();
std::optional<ModelConfig> preset(std::string_view name);

// ---- prompts ----------------------------------------------------------------

/// Embedded copies of resources/prompts/*.txt, keyed by file name.
std::vector<std::string> prompt_resource_names();
std::string_view prompt_resource(std::string_view name);

std::string build_termination_prompt(const corpus::TaskSpec& task);
/// Uses the raw source; the domain prompt's example is unnumbered.
std::string build_precondition_prompt(const corpus::TaskSpec& task);
std::string prompt_hash(std::string_view prompt);

// ---- records and cache ------------------------------------------------------

struct GenerationRecord {
  std::string task_id;
  std::string model;
  std::uint32_t sample_index = 0;
  std::string prompt_hash;
  std::string raw_text;
  std::optional<std::string> tool_error;  // set when no completion was obtained
  nlohmann::json request_params = nlohmann::json::object();
  std::uint32_t attempts = 0;
  double latency = 0;  // seconds
  std::string timestamp;
  std::variant<witness::Prediction, witness::FormatError> parsed = witness::FormatError{"unparsed"};

  /// Fills `parsed` from `raw_text`; a tool error parses as FormatError.
  void parse();
};

nlohmann::json record_to_json(const GenerationRecord& r);
/// Parses the record after loading. Throws std::runtime_error on a bad shape.
GenerationRecord record_from_json(const nlohmann::json& j);

/// runs/<run_id>/<model>/<task_id>/<sample_index>.json under `root`.
class RunCache {
 public:
  RunCache(std::filesystem::path root, std::string run_id);

  std::filesystem::path run_dir() const { return root_ / "runs" / run_id_; }
  std::filesystem::path path(std::string_view model, std::string_view task_id,
                             std::uint32_t sample_index) const;
  std::optional<GenerationRecord> load(std::string_view model, std::string_view task_id,
                                       std::uint32_t sample_index) const;
  /// Atomic write. A stored completion is never replaced; a stored tool
  /// error is.
  void store(const GenerationRecord& r) const;
  /// Models with a directory under the run.
  std::vector<std::string> models() const;

 private:
  std::filesystem::path root_;
  std::string run_id_;
};

// ---- transport and client ---------------------------------------------------

struct HttpResponse {
  int status = 0;  // 0: no response
  std::string body;
  std::string error;  // transport failure description
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& url,
                            const std::vector<std::pair<std::string, std::string>>& headers,
                            const std::string& body, std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib based; supports http and https.
std::unique_ptr<Transport> make_http_transport();

/// Minimum spacing between request starts.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second);
  void acquire();

 private:
  std::mutex mu_;
  std::chrono::nanoseconds interval_;
  std::chrono::steady_clock::time_point next_;
};

struct RetryPolicy {
  std::uint32_t max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{60000};

  std::chrono::milliseconds delay_after(std::uint32_t attempt) const;  // attempt is 1-based
};

class AuthError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Completion {
  std::optional<std::string> text;  // nullopt on failure
  std::string error;
  std::uint32_t attempts = 0;
  nlohmann::json request_params;  // sampling fields actually sent
  double latency = 0;
};

class ChatClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  /// Throws AuthError when `api_key_env` names an unset variable.
  ChatClient(ModelConfig model, Transport& transport, RetryPolicy retry = {},
             std::shared_ptr<RateLimiter> limiter = nullptr, Sleeper sleeper = nullptr);

  /// Retries network failures, 408, 429 and 5xx. An endpoint rejecting
  /// `temperature` gets one immediate resend without it, and later requests
  /// omit it. Throws AuthError on 401/403.
  Completion complete(const std::string& prompt);

  nlohmann::json request_body(const std::string& prompt, bool with_temperature) const;
  const ModelConfig& model() const { return model_; }
  bool temperature_dropped() const { return drop_temperature_; }

 private:
  ModelConfig model_;
  Transport& transport_;
  RetryPolicy retry_;
  std::shared_ptr<RateLimiter> limiter_;
  Sleeper sleeper_;
  std::string api_key_;
  std::atomic<bool> drop_temperature_{false};
};

/// choices[0].message.content; on failure nullopt with `*error` set.
std::optional<std::string> extract_content(std::string_view response_body,
                                           std::string* error = nullptr);

// ---- generation -------------------------------------------------------------

struct TaskPrompt {
  std::string task_id;
  std::string prompt;
};

enum class Mode { Live, Replay };

struct GenerateOptions {
  std::uint32_t n = 20;
  Mode mode = Mode::Live;
  std::uint32_t jobs = 4;  // concurrent requests
  std::function<std::string()> clock;  // timestamp source; default UTC now
};

struct GenerateResult {
  std::vector<GenerationRecord> records;  // sorted by (task_id, sample_index)
  std::vector<std::pair<std::string, std::uint32_t>> missing;  // replay misses
  std::uint64_t requests = 0;  // completions requested from the client
};

/// Live mode fills missing cache slots through `client` and loads the rest;
/// replay mode only loads. AuthError propagates.
GenerateResult generate(const std::string& model, ChatClient* client, const RunCache& cache,
                        const std::vector<TaskPrompt>& tasks, const GenerateOptions& opts);

}  // namespace termeval::oracle
