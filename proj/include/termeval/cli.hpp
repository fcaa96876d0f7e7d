#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "termeval/corpus.hpp"
#include "termeval/evalcore.hpp"
#include "termeval/lasso.hpp"
#include "termeval/oracle.hpp"
#include "termeval/precond.hpp"

namespace termeval::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // invalid witness, inequivalent, incomplete run
inline constexpr int kExitUsage = 2;    // bad arguments or configuration

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PromptKind { Termination, Precondition };

struct ModelEntry {
  oracle::ModelConfig model;
  oracle::Mode mode = oracle::Mode::Live;
};

/// Paths are absolute after loading; relative ones in the file are resolved
/// against the config file's directory.
struct RunConfig {
  std::filesystem::path corpus_root;
  std::set<corpus::Category> categories{corpus::kCategories.begin(), corpus::kCategories.end()};
  std::optional<std::filesystem::path> exclusions;
  std::optional<std::filesystem::path> token_sidecar;
  std::vector<ModelEntry> models;
  eval::EvalConfig eval;
  lasso::CheckerConfig checker;
  std::optional<lasso::ValidatorConfig> validator;
  std::filesystem::path output_dir;
  std::string run_id = "default";
  PromptKind prompt = PromptKind::Termination;
  oracle::RetryPolicy retry;
  std::optional<std::filesystem::path> annotations;
  precond::EquivalenceConfig precond;
  precond::Backend precond_backend = precond::Backend::Both;
  std::vector<std::uint64_t> pass_k = {1, 3};
};

/// Throws UsageError with the offending key.
RunConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::string clock;  // pinned ISO-8601 time; empty means now
  unsigned jobs = 1;
  oracle::Transport* transport = nullptr;  // live requests; default is HTTP
  std::optional<oracle::RetryPolicy> retry;  // overrides the config's
};

struct IngestOptions {
  std::set<corpus::Category> categories{corpus::kCategories.begin(), corpus::kCategories.end()};
  std::optional<std::filesystem::path> exclusions;
  std::optional<std::filesystem::path> token_sidecar;
};

int cmd_ingest(const std::filesystem::path& root, const std::filesystem::path& out_manifest,
               const IngestOptions& opts, Context& ctx);

int cmd_run(const RunConfig& cfg, Context& ctx);

struct CheckWitnessOptions {
  std::optional<std::filesystem::path> emit;  // GraphML output
  std::string architecture = "32bit";
  lasso::CheckerConfig checker;
  std::optional<lasso::ValidatorConfig> validator;
};

int cmd_check_witness(const std::filesystem::path& program, const std::filesystem::path& witness_json,
                      const CheckWitnessOptions& opts, Context& ctx);

/// Writes report.json, report.txt and runs.csv into `out_dir`.
int cmd_score(const RunConfig& cfg, const std::filesystem::path& out_dir, Context& ctx);

/// Pass@k of precondition generations against annotated ground truth.
/// Writes precond.json into `out_dir`.
int cmd_precond(const RunConfig& cfg, const std::filesystem::path& out_dir, Context& ctx);

/// Equivalence of one pair; exit 0 equivalent, 1 inequivalent or undecided.
int cmd_precond_pair(const std::string& a, const std::string& b,
                     const std::vector<precond::Variable>& vars, precond::Backend backend,
                     const precond::EquivalenceConfig& cfg, Context& ctx);

/// "i:int,x:unsigned" style variable lists.
std::vector<precond::Variable> parse_variable_list(const std::string& spec);

/// Verdict and witness status of one generation for scoring. FormatError
/// scores as UNK; an NT answer whose witness is missing, malformed or not
/// confirmed is Invalid.
/// Results are memoized per (task, witness); safe to call concurrently.
class Judge {
 public:
  /// `scratch` receives GraphML files for the external validator.
  Judge(const RunConfig& cfg, std::filesystem::path scratch);
  eval::Generation operator()(const corpus::TaskSpec& task, const oracle::GenerationRecord& r);
  std::string checker_mode() const;

 private:
  eval::WitnessStatus check(const corpus::TaskSpec& task, const witness::WitnessAutomaton& w);

  const RunConfig& cfg_;
  std::filesystem::path scratch_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const cparse::ParseResult>> programs_;
  std::map<std::pair<std::string, std::string>, eval::WitnessStatus> memo_;
  std::uint64_t graphml_counter_ = 0;
};

}  // namespace termeval::cli
