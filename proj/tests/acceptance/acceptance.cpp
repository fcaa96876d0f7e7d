// One PASS/FAIL/SKIP line per acceptance criterion. Exit status is 1 when
// any criterion fails; skipped criteria do not fail the run.
//
// Environment:
//   TERMEVAL_SVCOMP_ROOT      sv-benchmarks/c checkout (criterion 3)
//   TERMEVAL_EXCLUSIONS       exclusion list for it; default resources/exclusions.txt
//   TERMEVAL_UAUTOMIZER_ROOT  directory with Ultimate.py (criterion 11)

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "support/exprgen.hpp"
#include "support/loopgen.hpp"
#include "termeval/cli.hpp"
#include "termeval/corpus.hpp"
#include "termeval/evalcore.hpp"
#include "termeval/lasso.hpp"
#include "termeval/precond.hpp"
#include "termeval/subprocess.hpp"
#include "termeval/text.hpp"
#include "termeval/witness.hpp"

namespace fs = std::filesystem;
using namespace termeval;
using eval::Outcome;
using eval::WitnessStatus;
using witness::Verdict;

namespace {

const fs::path kFixtures = TERMEVAL_FIXTURES;
const fs::path kResources = TERMEVAL_RESOURCES;

enum class Status { Pass, Fail, Skip };

struct Result {
  Status status = Status::Pass;
  std::string detail;
};

Result pass(std::string d = "") { return {Status::Pass, std::move(d)}; }
Result fail(std::string d) { return {Status::Fail, std::move(d)}; }
Result skip(std::string d) { return {Status::Skip, std::move(d)}; }

// Collects failures inside one criterion.
struct Checks {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
  }
  Result result(std::string ok_detail) const {
    if (failures.empty()) return pass(std::move(ok_detail));
    std::string d;
    for (const auto& f : failures) d += (d.empty() ? "" : "; ") + f;
    return fail(d);
  }
};

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

template <class Fn>
void parallel_for(std::size_t n, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  for (unsigned t = 0; t < workers(); ++t)
    threads.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) fn(i);
    });
  for (auto& th : threads) th.join();
}

double binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::string fixture(const std::string& rel) { return read_file((kFixtures / rel).string()); }

witness::WitnessAutomaton witness_of(const std::string& text) {
  auto p = witness::parse_prediction(text);
  if (!std::holds_alternative<witness::Prediction>(p)) return {};
  return std::get<witness::Prediction>(p).witness.value_or(witness::WitnessAutomaton{});
}

bool proof_or_evidence(const lasso::FeasibilityResult& r) {
  return std::holds_alternative<lasso::ProvenInfinite>(r) || std::holds_alternative<lasso::BoundedEvidence>(r);
}

// ---- 1 ------------------------------------------------------------------------

Result scoring_table() {
  Checks c;
  const std::pair<Outcome, int> rows[] = {{Outcome::TN, 2},         {Outcome::TP_valid, 1}, {Outcome::TP_invalid, 0},
                                          {Outcome::UNK, 0},        {Outcome::FP, -16},     {Outcome::FN, -32}};
  for (auto [o, pts] : rows) c.expect(eval::score_sample(o) == pts, "row " + std::string(eval::to_string(o)));

  // Independent decision table over every (expected, predicted, witness) triple.
  auto oracle = [](Verdict e, Verdict p, WitnessStatus w) {
    if (p == Verdict::UNK) return Outcome::UNK;
    if (e == Verdict::T) return p == Verdict::T ? Outcome::TN : Outcome::FP;
    if (p == Verdict::T) return Outcome::FN;
    return w == WitnessStatus::Valid ? Outcome::TP_valid : Outcome::TP_invalid;
  };
  int triples = 0;
  for (Verdict e : {Verdict::T, Verdict::NT})
    for (Verdict p : {Verdict::T, Verdict::NT, Verdict::UNK})
      for (WitnessStatus w : {WitnessStatus::Valid, WitnessStatus::Invalid, WitnessStatus::Absent}) {
        ++triples;
        c.expect(eval::classify_sample(e, p, w) == oracle(e, p, w),
                 "triple " + std::string(witness::to_string(e)) + "/" + std::string(witness::to_string(p)) + "/" +
                     std::string(eval::to_string(w)));
      }
  c.expect(triples == 18, "triple count");
  return c.result("6 rows, 18 triples");
}

// ---- 2 ------------------------------------------------------------------------

Result score_formula() {
  std::mt19937_64 rng(2025);
  double worst = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    int k = std::uniform_int_distribution<int>(1, 6)(rng);
    std::vector<eval::CategoryAggregate> aggs;
    long double norm = 0, total = 0;
    for (int i = 0; i < k; ++i) {
      std::uint64_t n = std::uniform_int_distribution<std::uint64_t>(1, 2000)(rng);
      auto lo = -32 * static_cast<std::int64_t>(n), hi = 2 * static_cast<std::int64_t>(n);
      std::int64_t s = std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
      aggs.push_back({"c" + std::to_string(i), s, n});
      norm += static_cast<long double>(s) / static_cast<long double>(n);
      total += n;
    }
    long double direct = norm / k * total;
    double got = eval::svcomp_score(aggs);
    double err = direct == 0 ? std::fabs(got) : std::fabs((got - static_cast<double>(direct)) / static_cast<double>(direct));
    worst = std::max(worst, err);
  }
  std::ostringstream d;
  d << "1000 aggregates, max relative error " << worst;
  return worst < 1e-12 ? pass(d.str()) : fail(d.str());
}

// ---- 3 ------------------------------------------------------------------------

Result dataset_bounds() {
  const char* root = std::getenv("TERMEVAL_SVCOMP_ROOT");
  if (!root || !*root) return skip("TERMEVAL_SVCOMP_ROOT not set; dataset absent");
  const char* ex = std::getenv("TERMEVAL_EXCLUSIONS");
  corpus::HeuristicTokenCounter tokens;
  corpus::LoadOptions opts;
  opts.exclusions = corpus::read_exclusions(ex && *ex ? fs::path(ex) : kResources / "exclusions.txt");
  opts.tokens = &tokens;
  opts.jobs = workers();
  corpus::CorpusManifest m = corpus::load_manifest(root, opts);
  std::vector<std::pair<std::string, Verdict>> items;
  for (const auto& t : m.tasks) items.emplace_back(std::string(corpus::to_string(t.category)), t.expected);
  double best = eval::best_case_score(items), worst = eval::worst_case_score(items);
  std::ostringstream d;
  d.precision(10);
  d << m.tasks.size() << " tasks (" << m.errors.size() << " errors, " << m.excluded.size() << " excluded); best "
    << best << " (want 4079) " << (std::llround(best) == 4079 && std::fabs(best - 4079) < 1e-6 ? "ok" : "MISMATCH")
    << "; worst " << worst << " (want -50064) "
    << (std::llround(worst) == -50064 && std::fabs(worst + 50064) < 1e-6 ? "ok" : "MISMATCH");
  bool ok = std::fabs(best - 4079) < 1e-6 && std::fabs(worst + 50064) < 1e-6;
  return ok ? pass(d.str()) : fail(d.str());
}

// ---- 4 ------------------------------------------------------------------------

Result witness_goldens() {
  struct Golden {
    const char* program;
    const char* witness;
  };
  const Golden goldens[] = {
      {"loop_bounded_range.c", "loop_bounded_range.stem_cycle.json"},
      {"even_step.c", "even_step.json"},
      {"loop_bounded_range.c", "loop_bounded_range.selfloop.json"},
      {"complement_guard.c", "complement_guard.json"},
      {"stuck_at_minus5.c", "stuck_at_minus5.correct.json"},
  };
  Checks c;
  for (const auto& g : goldens) {
    std::string src = fixture(std::string("programs/") + g.program);
    auto w = witness_of(fixture(std::string("witnesses/") + g.witness));
    int lines = static_cast<int>(split_lines(src).size());
    c.expect(witness::validate_schema(w, lines).empty(), std::string(g.witness) + " schema");
    auto l = lasso::extract_lasso(w);
    if (!std::holds_alternative<lasso::LassoPath>(l)) {
      c.expect(false, std::string(g.witness) + " lasso");
      continue;
    }
    auto r = lasso::check_feasibility(cparse::parse_program(src), std::get<lasso::LassoPath>(l), {});
    c.expect(proof_or_evidence(r), std::string(g.witness) + " checker: " + lasso::describe(r));

    for (std::size_t k = 0; k < w.edges.size(); ++k) {
      auto dup = w;
      dup.edges[k].id = w.edges[(k + 1) % w.edges.size()].id;
      c.expect(w.edges.size() < 2 || !witness::validate_schema(dup, lines).empty(),
               std::string(g.witness) + " duplicate id accepted");
      auto noline = w;
      noline.edges[k].line.reset();
      c.expect(!witness::validate_schema(noline, lines).empty(), std::string(g.witness) + " missing line accepted");
    }
  }
  return c.result("5 witnesses confirmed; duplicate-id and missing-line mutations rejected");
}

// ---- 5 ------------------------------------------------------------------------

Result checker_soundness() {
  testgen::LoopGenerator gen(5150);
  std::vector<testgen::LoopCase> cases;
  for (int i = 0; i < 200; ++i) cases.push_back(gen.next());
  std::vector<lasso::FeasibilityResult> results(cases.size());
  parallel_for(cases.size(), [&](std::size_t i) {
    auto l = lasso::extract_lasso(witness_of(cases[i].witness_json));
    results[i] = std::holds_alternative<lasso::LassoPath>(l)
                     ? lasso::check_feasibility(cparse::parse_program(cases[i].source),
                                                std::get<lasso::LassoPath>(l), {})
                     : lasso::FeasibilityResult{lasso::Unknown{}};
  });
  int false_proofs = 0, false_infeasible = 0, divergent = 0, proven = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& r = results[i];
    if (cases[i].diverges) {
      ++divergent;
      bool in_domain = cases[i].diverging_input >= -64 && cases[i].diverging_input <= 64;
      if (in_domain && std::holds_alternative<lasso::Infeasible>(r)) ++false_infeasible;
      proven += std::holds_alternative<lasso::ProvenInfinite>(r);
    } else if (std::holds_alternative<lasso::ProvenInfinite>(r)) {
      ++false_proofs;
    }
  }
  std::ostringstream d;
  d << "200 loops (" << divergent << " divergent, " << proven << " proven); false proofs " << false_proofs
    << ", false infeasible " << false_infeasible;
  return false_proofs == 0 && false_infeasible == 0 ? pass(d.str()) : fail(d.str());
}

// ---- 6 ------------------------------------------------------------------------

Result tts_behaviour() {
  Checks c;
  double worst = 0;
  const std::pair<int, int> compositions[] = {{12, 3}, {5, 5}, {18, 1}, {2, 0}, {0, 4}, {10, 10}, {7, 0}};
  for (auto [a, b] : compositions) {
    int u = 20 - a - b;
    // P(all ten drawn votes are T or UNK, at least one T), etc.
    double total = binom(20, 10);
    double p_t = (binom(a + u, 10) - binom(u, 10)) / total;
    double p_nt = (binom(b + u, 10) - binom(u, 10)) / total;
    double p_unk = 1 - p_t - p_nt;
    std::vector<Verdict> votes;
    votes.insert(votes.end(), a, Verdict::T);
    votes.insert(votes.end(), b, Verdict::NT);
    votes.insert(votes.end(), u, Verdict::UNK);
    eval::SplitMix64 rng(0xC0FFEE + a * 64 + b);
    const int draws = 100000;
    std::map<Verdict, int> tally;
    for (int i = 0; i < draws; ++i) ++tally[eval::tts_consensus(votes, 10, rng)];
    for (auto [v, p] : {std::pair{Verdict::T, p_t}, {Verdict::NT, p_nt}, {Verdict::UNK, p_unk}}) {
      double diff = std::fabs(static_cast<double>(tally[v]) / draws - p);
      worst = std::max(worst, diff);
      c.expect(diff <= 0.02, "pool " + std::to_string(a) + "T/" + std::to_string(b) + "NT, " +
                                 std::string(witness::to_string(v)) + " rate");
    }
  }
  eval::SplitMix64 rng(3);
  for (Verdict v : {Verdict::T, Verdict::NT, Verdict::UNK}) {
    std::vector<Verdict> pool(20, v);
    for (int i = 0; i < 1000; ++i) c.expect(eval::tts_consensus(pool, 10, rng) == v, "unanimous pool");
  }
  std::ostringstream d;
  d << "7 pools x 100000 draws, max |empirical - hypergeometric| consensus rate " << worst;
  return c.result(d.str());
}

// ---- 7 ------------------------------------------------------------------------

Result f1_examples() {
  std::vector<std::pair<Verdict, Verdict>> half(5, {Verdict::NT, Verdict::NT});
  half.insert(half.end(), 5, {Verdict::NT, Verdict::UNK});
  auto f = eval::f1_per_class(half);
  auto none = eval::f1_per_class(std::vector<std::pair<Verdict, Verdict>>(10, {Verdict::NT, Verdict::UNK}));
  // precision 5/5, recall 5/10
  double expected = 2 * 1.0 * 0.5 / (1.0 + 0.5);
  Checks c;
  c.expect(f.nt.f1 == expected, "half UNK F1_NT " + std::to_string(f.nt.f1));
  c.expect(none.nt.f1 == 0.0 && none.t.f1 == 0.0, "all UNK");
  return c.result("F1_NT = 2/3 with half UNK; 0 when all UNK");
}

// ---- 8 ------------------------------------------------------------------------

Result pass_at_k() {
  Checks c;
  c.expect(eval::pass_at_k_exact(10, 10, 1) == eval::Fraction{1, 1}, "(10,10,1)");
  c.expect(eval::pass_at_k_exact(10, 5, 1) == eval::Fraction{1, 2}, "(10,5,1)");
  c.expect(eval::pass_at_k_exact(10, 5, 3) == eval::Fraction{11, 12}, "(10,5,3)");
  std::mt19937_64 pick(808);
  struct Triple {
    int n, c, k;
  };
  std::vector<Triple> triples;
  for (int i = 0; i < 20; ++i) {
    int n = std::uniform_int_distribution<int>(1, 30)(pick);
    int cc = std::uniform_int_distribution<int>(0, n)(pick);
    int k = std::uniform_int_distribution<int>(1, n)(pick);
    triples.push_back({n, cc, k});
  }
  std::vector<double> empirical(triples.size());
  parallel_for(triples.size(), [&](std::size_t i) {
    auto [n, cc, k] = triples[i];
    std::mt19937_64 rng(9000 + i);
    std::vector<int> items(n, 0);
    std::fill(items.begin(), items.begin() + cc, 1);
    const int trials = 1000000;
    int hits = 0;
    for (int t = 0; t < trials; ++t) {
      bool hit = false;
      for (int j = 0; j < k; ++j) {
        std::swap(items[j], items[std::uniform_int_distribution<int>(j, n - 1)(rng)]);
        hit = hit || items[j] == 1;
      }
      hits += hit;
    }
    empirical[i] = static_cast<double>(hits) / trials;
  });
  double worst = 0;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    double diff = std::fabs(empirical[i] - eval::pass_at_k(triples[i].n, triples[i].c, triples[i].k));
    worst = std::max(worst, diff);
    c.expect(diff <= 0.005, "MC (" + std::to_string(triples[i].n) + "," + std::to_string(triples[i].c) + "," +
                                std::to_string(triples[i].k) + ")");
  }
  std::ostringstream d;
  d << "exact values hold; 20 triples x 1e6 trials, max deviation " << worst;
  return c.result(d.str());
}

// ---- 9 ------------------------------------------------------------------------

bool solver_available() {
  return run_process({"z3", "-version"}, "", std::chrono::seconds(5)).spawned;
}

precond::ExprPtr parse(const std::string& text, const std::vector<precond::Variable>& vars) {
  auto r = precond::parse_precondition(text, &vars);
  if (auto* e = std::get_if<precond::ParseError>(&r)) throw std::runtime_error(text + ": " + e->message);
  return std::get<precond::ExprPtr>(r);
}

Result precond_equivalence() {
  Checks c;
  bool smt = solver_available();
  precond::Backend backend = smt ? precond::Backend::Both : precond::Backend::Brute;
  const std::vector<precond::Variable> xy = {{"x", cint::kInt}, {"y", cint::kInt}};
  const std::vector<precond::Variable> i = {{"i", cint::kInt}};

  auto r1 = precond::check_equivalence(*parse("x < 10 ∧ y > −10", xy), *parse("x ≤ 9 ∧ y ≥ −9", xy), xy, backend);
  c.expect(std::holds_alternative<precond::Equivalent>(r1), "paired bounds: " + precond::describe(r1));

  auto r2 = precond::check_equivalence(*parse("i = 0", i), *parse("i >= −5 and i <= 5", i), i, backend);
  if (auto* in = std::get_if<precond::Inequivalent>(&r2)) {
    std::int64_t v = in->counterexample.values.at(0).second;
    bool lhs = v == 0, rhs = v >= -5 && v <= 5;
    c.expect(lhs != rhs, "counterexample " + in->counterexample.to_string() + " does not separate");
  } else {
    c.expect(false, "i = 0 vs -5 <= i <= 5: " + precond::describe(r2));
  }

  if (!smt) return c.failures.empty() ? skip("z3 not installed; named pairs pass with brute only") : c.result("");

  testgen::ExprGenerator gen(4242, {"x", "y"});
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int k = 0; k < 1000; ++k) pairs.push_back(gen.pair());
  std::vector<precond::EquivalenceResult> brute(pairs.size()), solver(pairs.size());
  std::atomic<int> bad_cex{0};
  parallel_for(pairs.size(), [&](std::size_t k) {
    auto a = parse(pairs[k].first, xy), b = parse(pairs[k].second, xy);
    brute[k] = precond::check_brute(*a, *b, xy);
    solver[k] = precond::check_smt(*a, *b, xy);
    for (const auto* r : {&brute[k], &solver[k]})
      if (auto* in = std::get_if<precond::Inequivalent>(r)) {
        auto va = precond::evaluate(*a, xy, in->counterexample);
        auto vb = precond::evaluate(*b, xy, in->counterexample);
        if (!va || !vb || *va == *vb) ++bad_cex;
      }
  });
  int agree = 0, disagree = 0, degenerate = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (brute[k].index() == solver[k].index()) {
      ++agree;
      degenerate += std::holds_alternative<precond::Unknown>(brute[k]);
    } else {
      ++disagree;
      c.expect(false, pairs[k].first + " vs " + pairs[k].second + ": brute " + precond::describe(brute[k]) +
                          ", smt " + precond::describe(solver[k]));
    }
  }
  c.expect(bad_cex == 0, std::to_string(bad_cex.load()) + " counterexamples do not separate");
  std::ostringstream d;
  d << "named pairs hold; 1000 random pairs: " << agree << " agree (" << degenerate << " both degenerate), " << disagree
    << " disagree";
  return c.result(d.str());
}

// ---- 10 -----------------------------------------------------------------------

Result determinism() {
  fs::path tmp = fs::temp_directory_path() / ("termeval_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  auto cfg = cli::load_config(kFixtures / "run" / "config.toml");
  Checks c;
  const char* files[] = {"report.json", "report.txt", "runs.csv"};
  for (unsigned jobs : {1u, workers()}) {
    std::ostringstream out, err;
    cli::Context ctx{out, err, "2026-01-01T00:00:00Z", jobs};
    fs::path dir = tmp / std::to_string(jobs);
    int code = cli::cmd_score(cfg, dir, ctx);
    c.expect(code == 0, "score exit " + std::to_string(code) + ": " + err.str());
    if (code != 0) break;
    for (const char* f : files)
      c.expect(read_file((dir / f).string()) == read_file((kFixtures / "run" / "expected" / f).string()),
               std::string(f) + " differs from the bundled golden (jobs " + std::to_string(jobs) + ")");
  }
  fs::remove_all(tmp);
  return c.result("report.json, report.txt, runs.csv byte-identical to goldens across runs and thread counts");
}

// ---- 11 -----------------------------------------------------------------------

Result external_validator() {
  const char* root = std::getenv("TERMEVAL_UAUTOMIZER_ROOT");
  if (!root || !*root) return skip("TERMEVAL_UAUTOMIZER_ROOT not set; UAutomizer absent");
  if (!fs::exists(fs::path(root) / "Ultimate.py")) return skip(std::string("no Ultimate.py under ") + root);
  fs::path tmp = fs::temp_directory_path() / ("termeval_uautomizer_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  fs::path program = tmp / "loop_bounded_range.c";
  std::string source = fixture("programs/loop_bounded_range.c");
  write_file_atomic(program.string(), source);
  fs::path prp = tmp / "termination.prp";
  write_file_atomic(prp.string(), fixture("corpus/properties/termination.prp"));
  auto w = witness_of(fixture("witnesses/loop_bounded_range.stem_cycle.json"));
  fs::path graphml = tmp / "witness.graphml";
  write_file_atomic(graphml.string(), witness::emit_graphml(w, {program.string(), source, "32bit"}, {}));
  lasso::ValidatorConfig cfg;
  cfg.validator_root = root;
  cfg.property_path = prp.string();
  cfg.timeout = std::chrono::seconds(300);
  auto r = lasso::run_external_validator(program.string(), graphml.string(), cfg);
  fs::remove_all(tmp);
  if (std::holds_alternative<lasso::Validated>(r)) return pass("emitted GraphML validated (FALSE)");
  if (std::holds_alternative<lasso::Rejected>(r)) return fail("validator rejected the witness (TRUE)");
  return fail("validator tool error: " + std::get<lasso::ToolError>(r).output.substr(0, 300));
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // runtime bound; 0 for none
    std::function<Result()> run;
  };
  const Criterion criteria[] = {
      {1, "scoring table fidelity", 1, scoring_table},
      {2, "score formula oracle equivalence", 5, score_formula},
      {3, "dataset-conditional score bounds", 0, dataset_bounds},
      {4, "witness pipeline goldens", 10, witness_goldens},
      {5, "internal checker soundness", 60, checker_soundness},
      {6, "consensus voting behaviour", 30, tts_behaviour},
      {7, "F1 conventions", 0, f1_examples},
      {8, "pass@k estimator", 0, pass_at_k},
      {9, "precondition equivalence", 120, precond_equivalence},
      {10, "deterministic scoring", 0, determinism},
      {11, "external validator integration", 0, external_validator},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = fail(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (r.status == Status::Pass && c.budget_s > 0 && secs > c.budget_s) {
      std::ostringstream d;
      d << r.detail << "; runtime over the " << c.budget_s << " s bound";
      r = fail(d.str());
    }
    const char* tag = r.status == Status::Pass ? "PASS" : r.status == Status::Fail ? "FAIL" : "SKIP";
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.2fs", secs);
    std::cout << "[" << tag << "] " << c.id << ". " << c.name << " (" << timing << ")"
              << (r.detail.empty() ? "" : ": " + r.detail) << std::endl;
    failed += r.status == Status::Fail;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed or skipped") << "\n";
  return failed ? 1 : 0;
}
