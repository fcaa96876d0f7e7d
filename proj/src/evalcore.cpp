#include "termeval/evalcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>

namespace termeval::eval {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::TN: return "TN";
    case Outcome::TP_valid: return "TP_valid";
    case Outcome::TP_invalid: return "TP_invalid";
    case Outcome::FP: return "FP";
    case Outcome::FN: return "FN";
    case Outcome::UNK: return "UNK";
  }
  return "?";
}

std::string_view to_string(WitnessStatus s) {
  switch (s) {
    case WitnessStatus::Valid: return "valid";
    case WitnessStatus::Invalid: return "invalid";
    case WitnessStatus::Absent: return "absent";
  }
  return "?";
}

std::string_view to_string(Mode m) { return m == Mode::Single ? "single" : "tts"; }

Outcome classify_sample(Verdict expected, Verdict predicted, WitnessStatus status) {
  if (expected == Verdict::UNK) throw std::invalid_argument("expected verdict cannot be UNK");
  if (predicted == Verdict::UNK) return Outcome::UNK;
  if (expected == Verdict::T) return predicted == Verdict::T ? Outcome::TN : Outcome::FP;
  if (predicted == Verdict::T) return Outcome::FN;
  return status == WitnessStatus::Valid ? Outcome::TP_valid : Outcome::TP_invalid;
}

int score_sample(Outcome o) {
  switch (o) {
    case Outcome::TN: return 2;
    case Outcome::TP_valid: return 1;
    case Outcome::TP_invalid: return 0;
    case Outcome::UNK: return 0;
    case Outcome::FP: return -16;
    case Outcome::FN: return -32;
  }
  return 0;
}

void ConfusionCounts::add(Verdict expected, Outcome o, const std::string& category) {
  ++counts[static_cast<std::size_t>(o)];
  if (expected == Verdict::NT) ++expected_nt;
  ++category_samples[category];
}

std::uint64_t ConfusionCounts::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

double svcomp_score(const std::vector<CategoryAggregate>& aggregates) {
  if (aggregates.empty()) throw std::invalid_argument("no categories to score");
  double normalized = 0;
  std::uint64_t total = 0;
  for (const auto& a : aggregates) {
    if (a.n == 0) throw std::invalid_argument("category '" + a.category + "' has no samples");
    normalized += static_cast<double>(a.s) / static_cast<double>(a.n);
    total += a.n;
  }
  return normalized / static_cast<double>(aggregates.size()) * static_cast<double>(total);
}

// ---- randomness -----------------------------------------------------------------

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("below(0)");
  std::uint64_t limit = -bound % bound;  // 2^64 mod bound
  for (;;) {
    std::uint64_t r = next();
    if (r >= limit) return r % bound;
  }
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SplitMix64 SplitMix64::substream(std::uint64_t seed, std::string_view tag, std::uint64_t run,
                                 std::string_view task_id) {
  SplitMix64 mix(seed);
  std::uint64_t s = mix.next();
  for (std::uint64_t part : {fnv1a64(tag), run, fnv1a64(task_id)}) {
    SplitMix64 step(s ^ part);
    s = step.next();
  }
  return SplitMix64(s);
}

std::vector<std::size_t> draw_without_replacement(std::size_t pool, std::size_t n,
                                                  SplitMix64& rng) {
  if (n > pool) throw std::invalid_argument("cannot draw more items than the pool holds");
  std::vector<std::size_t> idx(pool);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(pool - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

Consensus tts_consensus_detail(const std::vector<Verdict>& votes, std::size_t n,
                               SplitMix64& rng) {
  Consensus c;
  c.drawn = draw_without_replacement(votes.size(), n, rng);
  std::optional<Verdict> seen;
  for (std::size_t i : c.drawn) {
    Verdict v = votes[i];
    if (v == Verdict::UNK) continue;
    if (!seen) {
      seen = v;
      c.representative = i;
    } else if (*seen != v) {
      c.representative.reset();
      return c;
    }
  }
  if (seen) c.verdict = *seen;
  return c;
}

Verdict tts_consensus(const std::vector<Verdict>& votes, std::size_t n, SplitMix64& rng) {
  return tts_consensus_detail(votes, n, rng).verdict;
}

// ---- metrics --------------------------------------------------------------------

void EvalConfig::check() const {
  if (pool_size == 0) throw std::invalid_argument("pool_size must be positive");
  if (n_bootstrap == 0) throw std::invalid_argument("n_bootstrap must be positive");
  if (tts_n == 0 || tts_n > pool_size)
    throw std::invalid_argument("tts_n must lie in [1, pool_size]");
}

namespace {

double ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }

ClassScores class_scores(const std::vector<std::pair<Verdict, Verdict>>& outcomes, Verdict cls) {
  double tp = 0, fp = 0, fn = 0;
  for (const auto& [expected, predicted] : outcomes) {
    if (predicted == cls && expected == cls) ++tp;
    else if (predicted == cls) ++fp;
    else if (expected == cls) ++fn;
  }
  ClassScores s;
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  s.f1 = ratio(2 * s.precision * s.recall, s.precision + s.recall);
  return s;
}

}  // namespace

F1Scores f1_per_class(const std::vector<std::pair<Verdict, Verdict>>& outcomes) {
  return {class_scores(outcomes, Verdict::T), class_scores(outcomes, Verdict::NT)};
}

WitnessMetrics witness_metrics(const ConfusionCounts& c) {
  double tpv = static_cast<double>(c[Outcome::TP_valid]);
  double tpi = static_cast<double>(c[Outcome::TP_invalid]);
  double fp = static_cast<double>(c[Outcome::FP]);
  WitnessMetrics m;
  m.validity = ratio(tpv, tpv + tpi);
  m.precision = ratio(tpv, tpv + tpi + fp);
  m.recall = ratio(tpv, static_cast<double>(c.expected_nt));
  return m;
}

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return r;
  double ss = 0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return r;
}

// ---- bootstrap ------------------------------------------------------------------

namespace {

void check_pools(const std::vector<TaskPool>& pools, const EvalConfig& cfg) {
  cfg.check();
  if (pools.empty()) throw std::invalid_argument("no tasks to evaluate");
  for (const auto& t : pools) {
    if (t.pool.size() != cfg.pool_size)
      throw std::invalid_argument("task '" + t.task_id + "' has " +
                                  std::to_string(t.pool.size()) + " predictions, expected " +
                                  std::to_string(cfg.pool_size));
    if (t.expected == Verdict::UNK)
      throw std::invalid_argument("task '" + t.task_id + "' has no expected verdict");
  }
}

std::vector<const TaskPool*> sorted_tasks(const std::vector<TaskPool>& pools) {
  std::vector<const TaskPool*> out;
  for (const auto& t : pools) out.push_back(&t);
  std::sort(out.begin(), out.end(),
            [](const TaskPool* a, const TaskPool* b) { return a->task_id < b->task_id; });
  return out;
}

}  // namespace

Outcome run_outcome(const TaskPool& task, const EvalConfig& cfg, Mode mode, std::size_t run,
                    Verdict* final_verdict) {
  SplitMix64 rng = SplitMix64::substream(cfg.rng_seed, to_string(mode), run, task.task_id);
  Verdict v = Verdict::UNK;
  WitnessStatus w = WitnessStatus::Absent;
  if (mode == Mode::Single) {
    const Generation& g = task.pool[rng.below(task.pool.size())];
    v = g.verdict;
    w = g.witness;
  } else {
    std::vector<Verdict> votes;
    votes.reserve(task.pool.size());
    for (const auto& g : task.pool) votes.push_back(g.verdict);
    Consensus c = tts_consensus_detail(votes, cfg.tts_n, rng);
    v = c.verdict;
    if (c.representative) w = task.pool[*c.representative].witness;
  }
  if (final_verdict) *final_verdict = v;
  return classify_sample(task.expected, v, w);
}

BootstrapResult bootstrap_eval(const std::vector<TaskPool>& pools, const EvalConfig& cfg,
                               Mode mode) {
  check_pools(pools, cfg);
  auto tasks = sorted_tasks(pools);
  BootstrapResult r;
  r.mode = mode;
  std::vector<double> f1_t, f1_nt;
  std::uint64_t unk = 0;
  for (std::size_t run = 0; run < cfg.n_bootstrap; ++run) {
    std::map<std::string, CategoryAggregate> agg;
    std::vector<std::pair<Verdict, Verdict>> outcomes;
    outcomes.reserve(tasks.size());
    for (const TaskPool* t : tasks) {
      Verdict v;
      Outcome o = run_outcome(*t, cfg, mode, run, &v);
      auto& a = agg[t->category];
      a.category = t->category;
      a.s += score_sample(o);
      ++a.n;
      outcomes.emplace_back(t->expected, v);
      if (v == Verdict::UNK) ++unk;
    }
    std::vector<CategoryAggregate> list;
    for (auto& [_, a] : agg) list.push_back(a);
    r.scores.push_back(svcomp_score(list));
    F1Scores f = f1_per_class(outcomes);
    f1_t.push_back(f.t.f1);
    f1_nt.push_back(f.nt.f1);
  }
  r.score = mean_std(r.scores);
  r.f1_t = mean_std(f1_t);
  r.f1_nt = mean_std(f1_nt);
  r.unk_rate = static_cast<double>(unk) / static_cast<double>(cfg.n_bootstrap * tasks.size());
  return r;
}

ConfusionCounts all_generation_counts(const std::vector<TaskPool>& pools) {
  ConfusionCounts c;
  for (const auto& t : pools)
    for (const auto& g : t.pool) c.add(t.expected, classify_sample(t.expected, g.verdict, g.witness), t.category);
  return c;
}

UnknownRates unknown_rates(const std::vector<TaskPool>& pools, const EvalConfig& cfg) {
  check_pools(pools, cfg);
  UnknownRates r;
  std::uint64_t unk = 0, total = 0;
  for (const auto& t : pools)
    for (const auto& g : t.pool) {
      ++total;
      if (g.verdict == Verdict::UNK) ++unk;
    }
  r.unk_rate = static_cast<double>(unk) / static_cast<double>(total);
  r.tts_unk_rate = bootstrap_eval(pools, cfg, Mode::Tts).unk_rate;
  return r;
}

std::array<std::optional<double>, 3> score_by_length_bin(
    const std::vector<TaskPool>& pools, const std::map<std::string, int>& bin_of_task) {
  std::array<double, 3> sum{};
  std::array<std::uint64_t, 3> count{};
  for (const auto& t : pools) {
    auto it = bin_of_task.find(t.task_id);
    if (it == bin_of_task.end() || it->second < 0 || it->second > 2)
      throw std::invalid_argument("task '" + t.task_id + "' has no length bin");
    for (const auto& g : t.pool) {
      sum[it->second] += score_sample(classify_sample(t.expected, g.verdict, g.witness));
      ++count[it->second];
    }
  }
  std::array<std::optional<double>, 3> out;
  for (int b = 0; b < 3; ++b)
    if (count[b] > 0) out[b] = sum[b] / static_cast<double>(count[b]);
  return out;
}

// ---- pass@k ---------------------------------------------------------------------

Fraction pass_at_k_exact(std::uint64_t n, std::uint64_t c, std::uint64_t k) {
  if (c > n || k < 1 || k > n)
    throw std::invalid_argument("pass@k needs 0 <= c <= n and 1 <= k <= n");
  using boost::multiprecision::cpp_int;
  auto binom = [](std::uint64_t a, std::uint64_t b) -> cpp_int {
    if (b > a) return 0;
    cpp_int r = 1;
    for (std::uint64_t i = 1; i <= b; ++i) r = r * (a - b + i) / i;
    return r;
  };
  cpp_int den = binom(n, k);
  cpp_int num = den - binom(n - c, k);
  cpp_int g = boost::multiprecision::gcd(num, den);
  if (g == 0) g = 1;
  num /= g;
  den /= g;
  if (num == 0) den = 1;
  if (den > std::numeric_limits<std::uint64_t>::max())
    throw std::overflow_error("pass@k fraction exceeds 64 bits");
  return {static_cast<std::uint64_t>(num), static_cast<std::uint64_t>(den)};
}

double pass_at_k(std::uint64_t n, std::uint64_t c, std::uint64_t k) {
  if (c > n || k < 1 || k > n)
    throw std::invalid_argument("pass@k needs 0 <= c <= n and 1 <= k <= n");
  try {
    return pass_at_k_exact(n, c, k).value();
  } catch (const std::overflow_error&) {
  }
  if (n - c < k) return 1.0;
  long double miss = 1;
  for (std::uint64_t i = 0; i < k; ++i)
    miss *= static_cast<long double>(n - c - i) / static_cast<long double>(n - i);
  return static_cast<double>(1 - miss);
}

namespace {

double extreme_score(const std::vector<std::pair<std::string, Verdict>>& items, int t_points,
                     int nt_points) {
  std::map<std::string, CategoryAggregate> agg;
  for (const auto& [cat, expected] : items) {
    auto& a = agg[cat];
    a.category = cat;
    a.s += expected == Verdict::T ? t_points : nt_points;
    ++a.n;
  }
  std::vector<CategoryAggregate> list;
  for (auto& [_, a] : agg) list.push_back(a);
  return svcomp_score(list);
}

}  // namespace

double best_case_score(const std::vector<std::pair<std::string, Verdict>>& items) {
  return extreme_score(items, score_sample(Outcome::TN), score_sample(Outcome::TP_valid));
}

double worst_case_score(const std::vector<std::pair<std::string, Verdict>>& items) {
  return extreme_score(items, score_sample(Outcome::FP), score_sample(Outcome::FN));
}

// ---- reports --------------------------------------------------------------------

ModelReport evaluate_model(const std::string& model, const std::vector<TaskPool>& pools,
                           const EvalConfig& cfg, const std::map<std::string, int>& bins,
                           std::string checker_mode) {
  ModelReport m;
  m.model = model;
  m.checker_mode = std::move(checker_mode);
  m.single = bootstrap_eval(pools, cfg, Mode::Single);
  m.tts = bootstrap_eval(pools, cfg, Mode::Tts);
  m.counts = all_generation_counts(pools);
  m.witness = witness_metrics(m.counts);
  m.unknown.unk_rate = unknown_rates(pools, cfg).unk_rate;
  m.unknown.tts_unk_rate = m.tts.unk_rate;
  if (!bins.empty()) m.bin_means = score_by_length_bin(pools, bins);
  return m;
}

namespace {

nlohmann::json ms_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

nlohmann::json bootstrap_json(const BootstrapResult& b) {
  return {{"mode", std::string(to_string(b.mode))},
          {"score", ms_json(b.score)},
          {"f1_t", ms_json(b.f1_t)},
          {"f1_nt", ms_json(b.f1_nt)},
          {"unk_rate", b.unk_rate},
          {"scores", b.scores}};
}

std::string fixed(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string lpad(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["generated_at"] = r.generated_at;
  j["config"] = {{"pool_size", r.config.pool_size},
                 {"n_bootstrap", r.config.n_bootstrap},
                 {"tts_n", r.config.tts_n},
                 {"rng_seed", r.config.rng_seed}};
  j["models"] = nlohmann::json::array();
  for (const auto& m : r.models) {
    nlohmann::json counts = nlohmann::json::object();
    for (Outcome o : kOutcomes) counts[std::string(to_string(o))] = m.counts[o];
    counts["expected_nt"] = m.counts.expected_nt;
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : m.bin_means) bins.push_back(b ? nlohmann::json(*b) : nlohmann::json());
    j["models"].push_back({{"model", m.model},
                           {"checker_mode", m.checker_mode},
                           {"single", bootstrap_json(m.single)},
                           {"tts", bootstrap_json(m.tts)},
                           {"counts", counts},
                           {"witness",
                            {{"precision", m.witness.precision},
                             {"recall", m.witness.recall},
                             {"validity", m.witness.validity}}},
                           {"unk_rate", m.unknown.unk_rate},
                           {"tts_unk_rate", m.unknown.tts_unk_rate},
                           {"length_bins", bins}});
  }
  return j;
}

std::string to_text(const EvalReport& r) {
  std::string out;
  out += "generated " + r.generated_at + ", " + std::to_string(r.config.n_bootstrap) +
         " runs, pool " + std::to_string(r.config.pool_size) + ", tts n=" +
         std::to_string(r.config.tts_n) + ", seed " + std::to_string(r.config.rng_seed) + "\n";
  out += pad("model", 24) + lpad("score", 18) + lpad("tts score", 18) + lpad("F1 T", 8) +
         lpad("F1 NT", 8) + lpad("W prec", 8) + lpad("W rec", 8) + lpad("W val", 8) +
         lpad("UNK", 8) + lpad("TTS UNK", 9) + "\n";
  for (const auto& m : r.models) {
    auto pm = [](const MeanStd& s) { return fixed(s.mean, 1) + " +- " + fixed(s.std, 1); };
    out += pad(m.model, 24) + lpad(pm(m.single.score), 18) + lpad(pm(m.tts.score), 18) +
           lpad(fixed(m.single.f1_t.mean, 3), 8) + lpad(fixed(m.single.f1_nt.mean, 3), 8) +
           lpad(fixed(m.witness.precision, 3), 8) + lpad(fixed(m.witness.recall, 3), 8) +
           lpad(fixed(m.witness.validity, 3), 8) + lpad(fixed(m.unknown.unk_rate, 3), 8) +
           lpad(fixed(m.unknown.tts_unk_rate, 3), 9) + "\n";
  }
  bool any_bins = false;
  for (const auto& m : r.models)
    for (const auto& b : m.bin_means) any_bins = any_bins || b.has_value();
  if (any_bins) {
    out += "\nmean sample score by length bin\n";
    out += pad("model", 24) + lpad("short", 10) + lpad("medium", 10) + lpad("long", 10) + "\n";
    for (const auto& m : r.models) {
      out += pad(m.model, 24);
      for (const auto& b : m.bin_means) out += lpad(b ? fixed(*b, 3) : "-", 10);
      out += "\n";
    }
  }
  return out;
}

std::string per_run_csv(const EvalReport& r) {
  std::string out = "model,mode,run,score\n";
  for (const auto& m : r.models)
    for (const BootstrapResult* b : {&m.single, &m.tts})
      for (std::size_t i = 0; i < b->scores.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", b->scores[i]);
        out += m.model + "," + std::string(to_string(b->mode)) + "," + std::to_string(i) + "," +
               buf + "\n";
      }
  return out;
}

}  // namespace termeval::eval
