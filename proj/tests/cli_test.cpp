#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "termeval/cli.hpp"
#include "termeval/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace termeval;

namespace {

const fs::path kFixtures = TERMEVAL_FIXTURES;
const fs::path kCorpus = kFixtures / "corpus";

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("termeval_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return read_file(p.string()); }

void put(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << s;
}

struct Captured {
  std::ostringstream out, err;
  cli::Context ctx{out, err, "2026-01-01T00:00:00Z", 1};
};

void store(const oracle::RunCache& cache, const std::string& model, const std::string& task, std::uint32_t i,
           const std::string& raw) {
  oracle::GenerationRecord r;
  r.task_id = task;
  r.model = model;
  r.sample_index = i;
  r.raw_text = raw;
  r.timestamp = "2026-01-01T00:00:00Z";
  r.parse();
  cache.store(r);
}

const std::string kT = "The loop counter is bounded.\n{\"verdict\": true}";
const std::string kUnk = "{\"verdict\": null}";
const std::string kNtBare = "{\"verdict\": false}";

std::string witness_answer(const std::string& file) { return "Reasoning...\n" + slurp(kFixtures / "witnesses" / file); }

// A scored run over the fixture corpus, minus the broken and excluded tasks.
struct FixtureRun {
  fs::path dir;
  fs::path config;

  explicit FixtureRun(const std::string& name, const std::string& extra_config = "") {
    dir = scratch(name);
    put(dir / "exclusions.txt",
        "termination-other/excluded.yml\ntermination-other/missing.yml\n");
    config = dir / "config.toml";
    put(config, "[corpus]\nroot = \"" + kCorpus.string() +
                    "\"\nexclusions = \"exclusions.txt\"\n\n"
                    "[output]\ndir = \"out\"\nrun_id = \"fixture\"\n\n"
                    "[eval]\npool_size = 3\nn_bootstrap = 8\ntts_n = 2\nseed = 7\n" +
                    extra_config);
    oracle::RunCache cache(dir / "out", "fixture");
    const std::map<std::string, std::string> steady = {
        {"termination-loops/counted_for.yml", kT},
        {"termination-loops/even_step.yml", witness_answer("even_step.json")},
        {"termination-loops/loop_bounded_range.yml", kT},
        {"termination-bv/sign_flip.yml", kUnk},
        {"termination-heap/heap.yml", kNtBare},
        {"termination-other/complement_guard.yml", witness_answer("complement_guard.json")},
        {"termination-other/stuck_at_minus5.yml", witness_answer("stuck_at_minus5.wrong.json")},
    };
    std::uint32_t salt = 0;
    for (const auto& [task, raw] : steady) {
      for (std::uint32_t i = 0; i < 3; ++i) {
        store(cache, "steady", task, i, raw);
        const std::string options[] = {kT, raw, kUnk, "I am not sure.", kNtBare};
        store(cache, "mixed", task, i, options[(i + salt) % 5]);
      }
      ++salt;
    }
  }

  cli::RunConfig cfg() const { return cli::load_config(config); }
};

}  // namespace

// ---- config -------------------------------------------------------------------

TEST(Config, ResolvesPathsAndReadsTables) {
  auto cfg = cli::parse_config(
      "[corpus]\nroot = \"c\"\ncategories = [\"Termination-Other\"]\n"
      "[output]\ndir = \"/abs/out\"\n"
      "[eval]\npool_size = 5\ntts_n = 3\nseed = 11\n"
      "[checker]\ndomain_lo = -8\ndomain_hi = 8\n"
      "[precond]\nsemantics = \"unbounded\"\nk = [1, 2, 5]\n"
      "[[models]]\nname = \"m\"\npreset = \"temp-0.6\"\nendpoint = \"http://h/v1/chat/completions\"\n"
      "[[models]]\nname = \"r\"\nmode = \"replay\"\n",
      "/base");
  EXPECT_EQ(cfg.corpus_root, fs::path("/base/c"));
  EXPECT_EQ(cfg.output_dir, fs::path("/abs/out"));
  EXPECT_EQ(cfg.categories, std::set<corpus::Category>{corpus::Category::Other});
  EXPECT_EQ(cfg.eval.pool_size, 5u);
  EXPECT_EQ(cfg.eval.rng_seed, 11u);
  EXPECT_EQ(cfg.checker.domain_lo, -8);
  EXPECT_EQ(cfg.precond.semantics, precond::Semantics::Unbounded);
  EXPECT_EQ(cfg.pass_k, (std::vector<std::uint64_t>{1, 2, 5}));
  ASSERT_EQ(cfg.models.size(), 2u);
  EXPECT_EQ(cfg.models[0].model.temperature, 0.6);
  EXPECT_EQ(cfg.models[0].mode, oracle::Mode::Live);
  EXPECT_EQ(cfg.models[1].mode, oracle::Mode::Replay);
}

TEST(Config, RejectsBadInput) {
  const char* bad[] = {
      "[corpus]\n",                                                  // no root
      "[corpus]\nroot = \"c\"\nbogus = 1\n",                         // unknown key
      "[corpus]\nroot = \"c\"\n[eval]\npool_size = 2\ntts_n = 3\n",  // tts_n > pool
      "[corpus]\nroot = \"c\"\n[eval]\npool_size = \"x\"\n",
      "[corpus]\nroot = \"c\"\ncategories = [\"Termination-Nope\"]\n",
      "[corpus]\nroot = \"c\"\n[[models]]\nname = \"m\"\n",  // live without endpoint
      "[corpus]\nroot = \"c\"\n[[models]]\nname = \"m\"\nmode = \"replay\"\n[[models]]\nname = \"m\"\nmode = "
      "\"replay\"\n",
      "[corpus]\nroot = \"c\"\n[[models]]\nname = \"m\"\npreset = \"temp-9\"\nmode = \"replay\"\n",
      "[corpus\nroot = \"c\"\n",
  };
  for (const char* text : bad) EXPECT_THROW(cli::parse_config(text, "/"), cli::UsageError) << text;
}

TEST(Config, VariableLists) {
  auto v = cli::parse_variable_list("i:int,x:unsigned,c:char,k");
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v[1].type, cint::kUInt);
  EXPECT_EQ(v[2].type, cint::kChar);
  EXPECT_EQ(v[3].type, cint::kInt);
  EXPECT_THROW(cli::parse_variable_list("i:float"), cli::UsageError);
  EXPECT_THROW(cli::parse_variable_list(""), cli::UsageError);
}

// ---- ingest -------------------------------------------------------------------

TEST(Ingest, ExitCodes) {
  fs::path dir = scratch("ingest");
  Captured c;
  EXPECT_EQ(cli::cmd_ingest(kCorpus, dir / "m.json", {}, c.ctx), cli::kExitFailure);  // missing.yml
  EXPECT_NE(c.err.str().find("missing.yml"), std::string::npos);

  cli::IngestOptions o;
  o.exclusions = dir / "ex.txt";
  put(*o.exclusions, "termination-other/missing.yml\n");
  Captured ok;
  EXPECT_EQ(cli::cmd_ingest(kCorpus, dir / "m.json", o, ok.ctx), cli::kExitOk);
  json m = json::parse(slurp(dir / "m.json"));
  EXPECT_EQ(m["tasks"].size(), 8u);

  fs::create_directories(dir / "empty");
  Captured empty;
  EXPECT_EQ(cli::cmd_ingest(dir / "empty", dir / "e.json", {}, empty.ctx), cli::kExitOk);

  Captured bad;
  EXPECT_EQ(cli::cmd_ingest(dir / "nope", dir / "n.json", {}, bad.ctx), cli::kExitUsage);
}

// ---- check-witness ------------------------------------------------------------

TEST(CheckWitness, ConfirmsAndRejects) {
  auto run = [](const std::string& program, const std::string& witness, std::string* out = nullptr) {
    Captured c;
    int code = cli::cmd_check_witness(kFixtures / "programs" / program, kFixtures / "witnesses" / witness, {}, c.ctx);
    if (out) *out = c.out.str();
    return code;
  };
  std::string out;
  EXPECT_EQ(run("even_step.c", "even_step.json", &out), cli::kExitOk);
  EXPECT_NE(out.find("schema: ok"), std::string::npos);
  EXPECT_EQ(run("complement_guard.c", "complement_guard.json"), cli::kExitOk);
  EXPECT_EQ(run("stuck_at_minus5.c", "stuck_at_minus5.correct.json"), cli::kExitOk);
  EXPECT_EQ(run("stuck_at_minus5.c", "stuck_at_minus5.wrong.json"), cli::kExitFailure);
}

TEST(CheckWitness, SchemaViolationFails) {
  fs::path dir = scratch("schema");
  json w = json::parse(slurp(kFixtures / "witnesses" / "even_step.json"));
  w["witness"]["edges"][1]["id"] = "E0";
  put(dir / "dup.json", w.dump());
  Captured c;
  EXPECT_EQ(cli::cmd_check_witness(kFixtures / "programs" / "even_step.c", dir / "dup.json", {}, c.ctx),
            cli::kExitFailure);
  EXPECT_NE(c.out.str().find("schema:"), std::string::npos);
  EXPECT_EQ(c.out.str().find("schema: ok"), std::string::npos);
}

TEST(CheckWitness, AcceptsBareAutomatonAndFreeText) {
  fs::path dir = scratch("forms");
  json w = json::parse(slurp(kFixtures / "witnesses" / "even_step.json"));
  put(dir / "bare.json", w["witness"].dump());
  put(dir / "answer.txt", "It loops forever.\n```json\n" + w.dump(2) + "\n```\n");
  for (const char* f : {"bare.json", "answer.txt"}) {
    Captured c;
    EXPECT_EQ(cli::cmd_check_witness(kFixtures / "programs" / "even_step.c", dir / f, {}, c.ctx), cli::kExitOk)
        << f;
  }
  put(dir / "none.txt", "{\"verdict\": true}");
  Captured c;
  EXPECT_EQ(cli::cmd_check_witness(kFixtures / "programs" / "even_step.c", dir / "none.txt", {}, c.ctx),
            cli::kExitFailure);
}

TEST(CheckWitness, EmitIsDeterministicUnderPinnedClock) {
  fs::path dir = scratch("emit");
  std::string first;
  for (int i = 0; i < 2; ++i) {
    cli::CheckWitnessOptions o;
    o.emit = dir / ("w" + std::to_string(i) + ".graphml");
    Captured c;
    ASSERT_EQ(cli::cmd_check_witness(kFixtures / "programs" / "even_step.c",
                                     kFixtures / "witnesses" / "even_step.json", o, c.ctx),
              cli::kExitOk);
    std::string g = slurp(*o.emit);
    EXPECT_NE(g.find("2026-01-01T00:00:00Z"), std::string::npos);
    if (i == 0) first = g;
    else EXPECT_EQ(g, first);
  }
  std::vector<std::string> errors;
  auto w = witness::witness_from_json(json::parse(slurp(kFixtures / "witnesses" / "even_step.json"))["witness"],
                                      errors);
  EXPECT_EQ(witness::read_graphml(first).automaton, w);
}

// ---- judge --------------------------------------------------------------------

TEST(Judge, MapsRecordsToGenerations) {
  cli::RunConfig cfg;
  cli::Judge judge(cfg, scratch("judge"));
  corpus::TaskSpec task;
  task.task_id = "even_step";
  task.source = slurp(kFixtures / "programs" / "even_step.c");
  auto rec = [](const std::string& raw) {
    oracle::GenerationRecord r;
    r.raw_text = raw;
    r.parse();
    return r;
  };
  auto g = judge(task, rec(kT));
  EXPECT_EQ(g.verdict, witness::Verdict::T);
  EXPECT_EQ(g.witness, eval::WitnessStatus::Absent);
  g = judge(task, rec("no json at all"));
  EXPECT_EQ(g.verdict, witness::Verdict::UNK);
  g = judge(task, rec(kNtBare));
  EXPECT_EQ(g.verdict, witness::Verdict::NT);
  EXPECT_EQ(g.witness, eval::WitnessStatus::Invalid);
  g = judge(task, rec(witness_answer("even_step.json")));
  EXPECT_EQ(g.witness, eval::WitnessStatus::Valid);
  g = judge(task, rec(witness_answer("even_step.odd_assumption.json")));
  EXPECT_EQ(g.witness, eval::WitnessStatus::Invalid);

  oracle::GenerationRecord err = rec("");
  err.tool_error = "timeout";
  err.parse();
  EXPECT_EQ(judge(task, err).verdict, witness::Verdict::UNK);
  EXPECT_EQ(judge.checker_mode(), "internal-checker");
}

// ---- score --------------------------------------------------------------------

TEST(Score, SteadyModelMatchesHandComputedValues) {
  FixtureRun run("score");
  Captured c;
  ASSERT_EQ(cli::cmd_score(run.cfg(), run.dir / "report", c.ctx), cli::kExitOk) << c.err.str();
  json r = json::parse(slurp(run.dir / "report" / "report.json"));
  ASSERT_EQ(r["models"].size(), 2u);
  const json* steady = nullptr;
  for (const auto& m : r["models"])
    if (m["model"] == "steady") steady = &m;
  ASSERT_NE(steady, nullptr);
  const json& s = *steady;

  // Per category (s_i, n_i): loops (2+1-32, 3), bv (0, 1), heap (-16, 1), other (1+0, 2).
  double expected = (1.0 / 4) * (-29.0 / 3 + 0.0 / 1 - 16.0 / 1 + 1.0 / 2) * 7;
  EXPECT_NEAR(s["single"]["score"]["mean"].get<double>(), expected, 1e-9);
  EXPECT_NEAR(s["single"]["score"]["std"].get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(s["tts"]["score"]["mean"].get<double>(), expected, 1e-9);

  // T: tp 1, predicted 2, actual 2. NT: tp 3, predicted 4, actual 5.
  EXPECT_NEAR(s["single"]["f1_t"]["mean"].get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(s["single"]["f1_nt"]["mean"].get<double>(), 2 * (0.75 * 0.6) / (0.75 + 0.6), 1e-12);

  EXPECT_EQ(s["counts"]["TN"], 3);
  EXPECT_EQ(s["counts"]["TP_valid"], 6);
  EXPECT_EQ(s["counts"]["TP_invalid"], 3);
  EXPECT_EQ(s["counts"]["FP"], 3);
  EXPECT_EQ(s["counts"]["FN"], 3);
  EXPECT_EQ(s["counts"]["UNK"], 3);
  EXPECT_NEAR(s["unk_rate"].get<double>(), 1.0 / 7, 1e-12);
  EXPECT_NEAR(s["tts_unk_rate"].get<double>(), 1.0 / 7, 1e-12);
  EXPECT_EQ(s["checker_mode"], "internal-checker");
  EXPECT_EQ(r["generated_at"], "2026-01-01T00:00:00Z");

  EXPECT_TRUE(fs::exists(run.dir / "report" / "report.txt"));
  EXPECT_TRUE(fs::exists(run.dir / "report" / "runs.csv"));
  EXPECT_NE(c.out.str().find("steady"), std::string::npos);
}

TEST(Score, ByteIdenticalAcrossRunsAndThreadCounts) {
  FixtureRun run("determinism");
  std::map<std::string, std::string> first;
  for (unsigned jobs : {1u, 4u, 1u}) {
    Captured c;
    c.ctx.jobs = jobs;
    fs::path out = run.dir / ("r" + std::to_string(jobs));
    ASSERT_EQ(cli::cmd_score(run.cfg(), out, c.ctx), cli::kExitOk) << c.err.str();
    for (const char* f : {"report.json", "report.txt", "runs.csv"}) {
      std::string content = slurp(out / f);
      if (!first.count(f)) first[f] = content;
      else EXPECT_EQ(content, first[f]) << f << " jobs=" << jobs;
    }
  }
}

TEST(Score, IncompletePoolFailsWithoutReport) {
  FixtureRun run("incomplete");
  oracle::RunCache cache(run.dir / "out", "fixture");
  fs::remove(cache.path("mixed", "termination-heap/heap.yml", 2));
  Captured c;
  EXPECT_EQ(cli::cmd_score(run.cfg(), run.dir / "report", c.ctx), cli::kExitFailure);
  EXPECT_NE(c.err.str().find("termination-heap/heap.yml (2 of 3)"), std::string::npos);
  EXPECT_FALSE(fs::exists(run.dir / "report" / "report.json"));
}

TEST(Score, ConfiguredModelSubset) {
  FixtureRun run("subset", "\n[[models]]\nname = \"steady\"\nmode = \"replay\"\n");
  Captured c;
  ASSERT_EQ(cli::cmd_score(run.cfg(), run.dir / "report", c.ctx), cli::kExitOk);
  json r = json::parse(slurp(run.dir / "report" / "report.json"));
  ASSERT_EQ(r["models"].size(), 1u);
  EXPECT_EQ(r["models"][0]["model"], "steady");
}

// ---- run ----------------------------------------------------------------------

TEST(Run, ReplayReportsMissesAndLoadsCache) {
  FixtureRun run("replay", "\n[[models]]\nname = \"steady\"\nmode = \"replay\"\n"
                           "[[models]]\nname = \"absent\"\nmode = \"replay\"\n");
  Captured c;
  EXPECT_EQ(cli::cmd_run(run.cfg(), c.ctx), cli::kExitFailure);
  EXPECT_NE(c.out.str().find("steady: 21 records, 0 requested, 0 tool errors, 0 missing"), std::string::npos)
      << c.out.str();
  EXPECT_NE(c.out.str().find("absent: 0 records, 0 requested, 0 tool errors, 21 missing"), std::string::npos);
}

namespace {

struct FixedTransport : oracle::Transport {
  std::atomic<int> calls{0};
  oracle::HttpResponse post(const std::string&, const std::vector<std::pair<std::string, std::string>>&,
                            const std::string&, std::chrono::milliseconds) override {
    ++calls;
    json body = {{"choices", {{{"message", {{"content", "{\"verdict\": true}"}}}}}}};
    return {200, body.dump(), ""};
  }
};

}  // namespace

TEST(Run, LiveFillsCacheThenScores) {
  FixtureRun run("live", "\n[[models]]\nname = \"fresh\"\nendpoint = \"http://127.0.0.1:1/v1/chat/completions\"\n");
  FixedTransport t;
  Captured c;
  c.ctx.transport = &t;
  c.ctx.jobs = 4;
  auto cfg = run.cfg();
  ASSERT_EQ(cli::cmd_run(cfg, c.ctx), cli::kExitOk) << c.err.str();
  EXPECT_EQ(t.calls, 21);
  auto rec = oracle::RunCache(run.dir / "out", "fixture").load("fresh", "termination-heap/heap.yml", 0);
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->timestamp, "2026-01-01T00:00:00Z");
  EXPECT_FALSE(rec->prompt_hash.empty());

  Captured again;
  again.ctx.transport = &t;
  ASSERT_EQ(cli::cmd_run(cfg, again.ctx), cli::kExitOk);
  EXPECT_EQ(t.calls, 21);

  Captured s;
  ASSERT_EQ(cli::cmd_score(cfg, run.dir / "report", s.ctx), cli::kExitOk) << s.err.str();
}

// ---- precond ------------------------------------------------------------------

namespace {

const char* kStuck = "termination-other/stuck_at_minus5.yml";
const char* kGuard = "termination-other/complement_guard.yml";

FixtureRun precond_run(const std::string& name) {
  FixtureRun run(name, "\n[[models]]\nname = \"m\"\nmode = \"replay\"\n\n[precond]\nannotations = \"annotations.json\"\nk = [1, 3]\n");
  std::string cfg = slurp(run.config);
  cfg.replace(cfg.find("pool_size = 3"), 13, "pool_size = 10");
  put(run.config, cfg);
  put(run.dir / "annotations.json",
      json{{kStuck, "i <= -5"}, {kGuard, {{"precondition", "y > 0 and x < -1"}, {"variables", "x:int,y:int"}}}}
          .dump(2));
  oracle::RunCache cache(run.dir / "out", "fixture");
  const std::vector<std::string> stuck = {
      "i <= -5",
      "The loop sticks at -5.\nAnswer: i < -4",
      "<answer>-5 >= i</answer>",
      "```\nnot (i > -5)\n```",
      "**Answer:** `(i <= -5) and (i >= -2147483648)`.",
      "i < 0",
      "Answer: i == -5",
      "i <= -6",
      "<answer>i >= -5</answer>",
      "no idea",
  };
  const std::vector<std::string> guard = {
      "y > 0 and x < -1", "x < -1 && y > 0", "(x <= -2) and (y >= 1)", "Answer: y > 0 ∧ x < −1",
      "<answer>!(y <= 0) and !(x >= -1)</answer>", "x <= -2 && y > 0", "y>0&&x<-1",
      "not (x >= -1 or y <= 0)", "0 < y and -1 > x", "answer: y >= 1 and x <= -2"};
  for (std::uint32_t i = 0; i < 10; ++i) {
    store(cache, "m", kStuck, i, stuck[i]);
    store(cache, "m", kGuard, i, guard[i]);
  }
  return run;
}

}  // namespace

TEST(Precond, PassAtKOverAnnotatedTasks) {
  FixtureRun run = precond_run("precond");
  Captured c;
  ASSERT_EQ(cli::cmd_precond(run.cfg(), run.dir / "report", c.ctx), cli::kExitOk) << c.err.str();
  json r = json::parse(slurp(run.dir / "report" / "precond.json"));
  ASSERT_EQ(r["models"].size(), 1u);
  std::map<std::string, json> tasks;
  for (const auto& t : r["models"][0]["tasks"]) tasks[t["task_id"]] = t;

  const json& stuck = tasks.at(kStuck);
  EXPECT_EQ(stuck["c"], 5) << stuck.dump(2);
  EXPECT_NEAR(stuck["pass@1"].get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(stuck["pass@3"].get<double>(), 11.0 / 12, 1e-12);  // 1 - C(5,3)/C(10,3)

  const json& guard = tasks.at(kGuard);
  EXPECT_EQ(guard["c"], 10) << guard.dump(2);
  EXPECT_NEAR(guard["pass@1"].get<double>(), 1.0, 1e-12);

  EXPECT_NEAR(r["models"][0]["mean"]["pass@1"].get<double>(), 0.75, 1e-12);
  EXPECT_NEAR(r["models"][0]["mean"]["pass@3"].get<double>(), (11.0 / 12 + 1) / 2, 1e-12);
}

TEST(Precond, BadGroundTruthOrTaskIsUsageError) {
  FixtureRun run = precond_run("precond_bad");
  put(run.dir / "annotations.json", json{{kStuck, "i <= "}}.dump());
  Captured c;
  EXPECT_EQ(cli::cmd_precond(run.cfg(), run.dir / "report", c.ctx), cli::kExitUsage);
  put(run.dir / "annotations.json", json{{"termination-other/nope.yml", "i < 0"}}.dump());
  Captured d;
  EXPECT_EQ(cli::cmd_precond(run.cfg(), run.dir / "report", d.ctx), cli::kExitUsage);
}

TEST(Precond, PairEquivalence) {
  auto vars = cli::parse_variable_list("i:int");
  Captured a;
  EXPECT_EQ(cli::cmd_precond_pair("i % 2 != 0 and i >= -2147483649", "i % 2 != 0", vars, precond::Backend::Both,
                                  {}, a.ctx),
            cli::kExitOk)
      << a.out.str();
  Captured b;
  EXPECT_EQ(cli::cmd_precond_pair("i > 0", "i >= 0", vars, precond::Backend::Both, {}, b.ctx), cli::kExitFailure);
  Captured c;
  EXPECT_EQ(cli::cmd_precond_pair("i >", "i", vars, precond::Backend::Brute, {}, c.ctx), cli::kExitUsage);
}

// ---- binary -------------------------------------------------------------------

namespace {

int run_cli(const std::string& args) {
  std::string cmd = std::string(TERMEVAL_CLI) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Binary, ExitCodes) {
  fs::path dir = scratch("binary");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("score"), 2);
  EXPECT_EQ(run_cli("score --config " + (dir / "absent.toml").string()), 2);
  EXPECT_EQ(run_cli("check-witness " + (kFixtures / "programs/even_step.c").string() + " " +
                    (kFixtures / "witnesses/even_step.json").string()),
            0);
  EXPECT_EQ(run_cli("check-witness " + (kFixtures / "programs/stuck_at_minus5.c").string() + " " +
                    (kFixtures / "witnesses/stuck_at_minus5.wrong.json").string()),
            1);
  EXPECT_EQ(run_cli("precond --pair 'i < 0' 'i <= -1' --vars i:int"), 0);
  EXPECT_EQ(run_cli("precond --pair 'i < 0' 'i <= -1'"), 2);
  EXPECT_EQ(run_cli("ingest " + kCorpus.string() + " --out " + (dir / "m.json").string()), 1);
}

TEST(Binary, ScoreWritesIntoRunDirectory) {
  FixtureRun run("binary_score");
  EXPECT_EQ(run_cli("--clock 2026-01-01T00:00:00Z score --config " + run.config.string()), 0);
  EXPECT_TRUE(fs::exists(run.dir / "out" / "runs" / "fixture" / "report.json"));
}
