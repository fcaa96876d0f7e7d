#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "termeval/witness.hpp"

namespace termeval::eval {

using witness::Verdict;

enum class WitnessStatus { Valid, Invalid, Absent };
enum class Outcome { TN, TP_valid, TP_invalid, FP, FN, UNK };

inline constexpr std::array<Outcome, 6> kOutcomes = {Outcome::TN, Outcome::TP_valid,
                                                     Outcome::TP_invalid, Outcome::FP,
                                                     Outcome::FN, Outcome::UNK};

std::string_view to_string(Outcome o);
std::string_view to_string(WitnessStatus s);

/// Throws std::invalid_argument when `expected` is UNK.
Outcome classify_sample(Verdict expected, Verdict predicted, WitnessStatus status);
int score_sample(Outcome o);

struct ConfusionCounts {
  std::array<std::uint64_t, 6> counts{};
  std::uint64_t expected_nt = 0;  // NT-expected samples, including UNK ones
  std::map<std::string, std::uint64_t> category_samples;

  void add(Verdict expected, Outcome o, const std::string& category = "");
  std::uint64_t operator[](Outcome o) const { return counts[static_cast<std::size_t>(o)]; }
  std::uint64_t total() const;
};

struct CategoryAggregate {
  std::string category;
  std::int64_t s = 0;  // summed sample points
  std::uint64_t n = 0;
};

/// (1/k) * sum(s_i / n_i) * sum(n_i). Throws std::invalid_argument on an
/// empty list or a category with n = 0.
double svcomp_score(const std::vector<CategoryAggregate>& aggregates);

/// Deterministic 64-bit generator with derivable substreams.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Stream for one (seed, tag, run, task) combination.
  static SplitMix64 substream(std::uint64_t seed, std::string_view tag, std::uint64_t run,
                              std::string_view task_id);

 private:
  std::uint64_t state_;
};

std::uint64_t fnv1a64(std::string_view s);

/// `n` distinct indices from [0, pool), in draw order.
std::vector<std::size_t> draw_without_replacement(std::size_t pool, std::size_t n,
                                                  SplitMix64& rng);

struct Consensus {
  Verdict verdict = Verdict::UNK;
  std::vector<std::size_t> drawn;
  /// First drawn vote carrying the adopted verdict.
  std::optional<std::size_t> representative;
};

Consensus tts_consensus_detail(const std::vector<Verdict>& votes, std::size_t n,
                               SplitMix64& rng);
Verdict tts_consensus(const std::vector<Verdict>& votes, std::size_t n, SplitMix64& rng);

/// One parsed generation. Format errors arrive as verdict UNK.
struct Generation {
  Verdict verdict = Verdict::UNK;
  WitnessStatus witness = WitnessStatus::Absent;
};

struct TaskPool {
  std::string task_id;
  std::string category;
  Verdict expected = Verdict::T;
  std::vector<Generation> pool;
};

struct EvalConfig {
  std::size_t pool_size = 20;
  std::size_t n_bootstrap = 100;
  std::size_t tts_n = 10;
  std::uint64_t rng_seed = 0;

  /// Throws std::invalid_argument when the invariants fail.
  void check() const;
};

struct ClassScores {
  double precision = 0, recall = 0, f1 = 0;
};

struct F1Scores {
  ClassScores t, nt;
};

/// Pairs of (expected, final verdict). UNK predictions count towards the
/// recall denominator of their expected class only.
F1Scores f1_per_class(const std::vector<std::pair<Verdict, Verdict>>& outcomes);

struct WitnessMetrics {
  double precision = 0, recall = 0, validity = 0;
};

WitnessMetrics witness_metrics(const ConfusionCounts& c);

struct MeanStd {
  double mean = 0, std = 0;
};

/// Mean and sample (n-1) standard deviation; std is 0 for fewer than two values.
MeanStd mean_std(const std::vector<double>& xs);

enum class Mode { Single, Tts };
std::string_view to_string(Mode m);

struct BootstrapResult {
  Mode mode = Mode::Single;
  std::vector<double> scores;  // one per run
  MeanStd score, f1_t, f1_nt;
  double unk_rate = 0;  // final UNK verdicts over (task, run) pairs
};

/// Pools are processed in task_id order; each must hold exactly
/// cfg.pool_size generations (std::invalid_argument names the task).
BootstrapResult bootstrap_eval(const std::vector<TaskPool>& pools, const EvalConfig& cfg,
                               Mode mode);

/// Final outcome of one task in one bootstrap run.
Outcome run_outcome(const TaskPool& task, const EvalConfig& cfg, Mode mode, std::size_t run,
                    Verdict* final_verdict = nullptr);

struct UnknownRates {
  double unk_rate = 0;      // over all generations
  double tts_unk_rate = 0;  // over (task, run) pairs under consensus
};

UnknownRates unknown_rates(const std::vector<TaskPool>& pools, const EvalConfig& cfg);

/// Outcome counts over every generation of every task.
ConfusionCounts all_generation_counts(const std::vector<TaskPool>& pools);

/// Mean sample score over all generations of the tasks in each bin. Bins
/// without tasks are nullopt. Throws when a task has no bin.
std::array<std::optional<double>, 3> score_by_length_bin(
    const std::vector<TaskPool>& pools, const std::map<std::string, int>& bin_of_task);

/// 1 - C(n-c, k) / C(n, k), exact as a reduced fraction.
struct Fraction {
  std::uint64_t num = 0, den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Fraction&, const Fraction&) = default;
};

/// Throws std::invalid_argument unless 0 <= c <= n and 1 <= k <= n.
Fraction pass_at_k_exact(std::uint64_t n, std::uint64_t c, std::uint64_t k);
double pass_at_k(std::uint64_t n, std::uint64_t c, std::uint64_t k);

/// Scores when every sample takes its best (T: +2, NT: +1) or worst
/// (T: -16, NT: -32) row.
double best_case_score(const std::vector<std::pair<std::string, Verdict>>& category_and_expected);
double worst_case_score(const std::vector<std::pair<std::string, Verdict>>& category_and_expected);

// ---- reports ------------------------------------------------------------------

struct ModelReport {
  std::string model;
  std::string checker_mode;  // "external-validator" or "internal-checker"
  BootstrapResult single, tts;
  ConfusionCounts counts;
  WitnessMetrics witness;
  UnknownRates unknown;
  std::array<std::optional<double>, 3> bin_means;
};

struct EvalReport {
  EvalConfig config;
  std::string generated_at;
  std::vector<ModelReport> models;
};

ModelReport evaluate_model(const std::string& model, const std::vector<TaskPool>& pools,
                           const EvalConfig& cfg, const std::map<std::string, int>& bins,
                           std::string checker_mode);

nlohmann::json to_json(const EvalReport& r);
std::string to_text(const EvalReport& r);
std::string per_run_csv(const EvalReport& r);

}  // namespace termeval::eval
