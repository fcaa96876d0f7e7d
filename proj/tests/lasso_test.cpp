#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "support/loopgen.hpp"
#include "termeval/lasso.hpp"
#include "termeval/text.hpp"

using namespace termeval;
using namespace termeval::lasso;
using witness::WitnessAutomaton;

namespace {

std::string fixture(const std::string& rel) {
  return read_file(std::string(TERMEVAL_FIXTURES) + "/" + rel);
}

WitnessAutomaton witness_from_text(const std::string& text) {
  auto r = witness::parse_prediction(text);
  EXPECT_TRUE(std::holds_alternative<witness::Prediction>(r));
  return std::get<witness::Prediction>(r).witness.value();
}

cparse::Program program_from_text(const std::string& src) {
  auto r = cparse::parse_program(src);
  EXPECT_TRUE(std::holds_alternative<cparse::Program>(r));
  return std::get<cparse::Program>(std::move(r));
}

LassoPath must_lasso(const WitnessAutomaton& w) {
  auto r = extract_lasso(w);
  if (auto* n = std::get_if<NoLasso>(&r)) {
    ADD_FAILURE() << "no lasso: " << n->reason;
    return {};
  }
  return std::get<LassoPath>(r);
}

std::vector<std::string> ids(const std::vector<witness::WitnessEdge>& edges) {
  std::vector<std::string> out;
  for (const auto& e : edges) out.push_back(*e.id);
  return out;
}

FeasibilityResult check_fixture(const std::string& program, const std::string& witness,
                                const CheckerConfig& cfg = {}) {
  cparse::Program p = program_from_text(fixture("programs/" + program));
  WitnessAutomaton w = witness_from_text(fixture("witnesses/" + witness));
  return check_feasibility(p, must_lasso(w), cfg);
}

bool is_proof_or_evidence(const FeasibilityResult& r) {
  return std::holds_alternative<ProvenInfinite>(r) || std::holds_alternative<BoundedEvidence>(r);
}

}  // namespace

TEST(Lasso, NaturalOrder) {
  EXPECT_TRUE(natural_less("E2", "E10"));
  EXPECT_FALSE(natural_less("E10", "E2"));
  EXPECT_TRUE(natural_less("E1", "E1a"));
  EXPECT_TRUE(natural_less("A9", "B0"));
  EXPECT_FALSE(natural_less("E3", "E3"));
}

TEST(Lasso, StemCycleWitnessDecomposition) {
  auto fig2 = must_lasso(witness_from_text(fixture("witnesses/loop_bounded_range.stem_cycle.json")));
  EXPECT_EQ(ids(fig2.stem), (std::vector<std::string>{"E0", "E1"}));
  EXPECT_EQ(ids(fig2.cycle), (std::vector<std::string>{"E2", "E3"}));
  EXPECT_EQ(fig2.cyclehead, "N0");
  EXPECT_EQ(fig2.entry, "N1");

  auto few = must_lasso(witness_from_text(fixture("witnesses/even_step.json")));
  EXPECT_EQ(ids(few.stem), (std::vector<std::string>{"E0", "E1"}));
  EXPECT_EQ(ids(few.cycle), (std::vector<std::string>{"E2", "E3"}));

  auto self = must_lasso(witness_from_text(fixture("witnesses/loop_bounded_range.selfloop.json")));
  EXPECT_EQ(ids(self.cycle), (std::vector<std::string>{"E2"}));

  auto cg = must_lasso(witness_from_text(fixture("witnesses/complement_guard.json")));
  EXPECT_EQ(ids(cg.stem), (std::vector<std::string>{"E0", "E1", "E2", "E3", "E4"}));
  EXPECT_EQ(ids(cg.cycle), (std::vector<std::string>{"E5", "E6"}));
  EXPECT_EQ(cg.cycle.back().target, "N0");
}

TEST(Lasso, NoCycleThroughCyclehead) {
  WitnessAutomaton w;
  w.nodes = {{"N1", true, {}}, {"N0", {}, true}, {"N2", {}, {}}};
  w.edges = {{"E0", "N1", "N0", 1, "a", {}, {}, {}, {}, {}},
             {"E1", "N0", "N2", 2, "b", {}, {}, {}, {}, {}}};
  EXPECT_TRUE(std::holds_alternative<NoLasso>(extract_lasso(w)));
}

TEST(Lasso, SmallestCycleByEdgeIds) {
  // Two cycles through N0: via E10 and via E2. Natural order prefers E2.
  WitnessAutomaton w;
  w.nodes = {{"N1", true, {}}, {"N0", {}, true}, {"A", {}, {}}, {"B", {}, {}}};
  w.edges = {{"E0", "N1", "N0", 1, "s", {}, {}, {}, {}, {}},
             {"E10", "N0", "A", 2, "s", {}, {}, {}, {}, {}},
             {"E11", "A", "N0", 3, "s", {}, {}, {}, {}, {}},
             {"E2", "N0", "B", 4, "s", {}, {}, {}, {}, {}},
             {"E3", "B", "N0", 5, "s", {}, {}, {}, {}, {}}};
  auto l = must_lasso(w);
  EXPECT_EQ(ids(l.cycle), (std::vector<std::string>{"E2", "E3"}));
}

TEST(Lasso, StemStopsAtFirstCycleheadVisit) {
  WitnessAutomaton w;
  w.nodes = {{"N1", true, {}}, {"N0", {}, true}, {"X", {}, {}}};
  w.edges = {{"E0", "N1", "N0", 1, "s", {}, {}, {}, {}, {}},
             {"E1", "N0", "X", 2, "s", {}, {}, {}, {}, {}},
             {"E2", "X", "N0", 3, "s", {}, {}, {}, {}, {}}};
  auto l = must_lasso(w);
  EXPECT_EQ(ids(l.stem), (std::vector<std::string>{"E0"}));
  EXPECT_EQ(ids(l.cycle), (std::vector<std::string>{"E1", "E2"}));
}

TEST(Enumeration, DomainSequence) {
  EXPECT_EQ(domain_sequence(-2, 2, cint::kInt), (std::vector<std::int64_t>{0, 1, -1, 2, -2}));
  EXPECT_EQ(domain_sequence(-3, 3, cint::kUInt), (std::vector<std::int64_t>{0, 1, 2, 3}));
  EXPECT_EQ(domain_sequence(-64, 64, cint::kBool), (std::vector<std::int64_t>{0, 1}));
  EXPECT_EQ(domain_sequence(5, 7, cint::kInt), (std::vector<std::int64_t>{5, 6, 7}));
  EXPECT_EQ(domain_sequence(-64, 64, cint::kInt).size(), 129u);
  EXPECT_EQ(domain_sequence(-200, 200, cint::kChar).size(), 256u);
}

TEST(Enumeration, ShellOrderMatchesSortOracle) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t k = 1 + rng() % 3;
    std::vector<std::size_t> sizes(k);
    for (auto& s : sizes) s = 1 + rng() % 5;
    // Oracle: every tuple, sorted by (max index, lexicographic).
    std::vector<std::vector<std::size_t>> all{{}};
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<std::vector<std::size_t>> next;
      for (const auto& t : all)
        for (std::size_t v = 0; v < sizes[i]; ++v) {
          auto u = t;
          u.push_back(v);
          next.push_back(u);
        }
      all = next;
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      auto ma = *std::max_element(a.begin(), a.end()), mb = *std::max_element(b.begin(), b.end());
      return ma != mb ? ma < mb : a < b;
    });
    EXPECT_EQ(shell_order(sizes, 1'000'000), all);
    auto capped = shell_order(sizes, 3);
    EXPECT_EQ(capped.size(), std::min<std::size_t>(3, all.size()));
    EXPECT_TRUE(std::equal(capped.begin(), capped.end(), all.begin()));
  }
}

TEST(Feasibility, StemCycleProvenInfiniteAtZero) {
  for (const char* w : {"loop_bounded_range.stem_cycle.json", "loop_bounded_range.selfloop.json"}) {
    auto r = check_fixture("loop_bounded_range.c", w);
    ASSERT_TRUE(std::holds_alternative<ProvenInfinite>(r)) << w << ": " << describe(r);
    const auto& p = std::get<ProvenInfinite>(r);
    EXPECT_EQ(p.rendered_state, "i=0");
    EXPECT_EQ(p.assignment.values, (std::vector<std::pair<std::string, std::int64_t>>{{"i", 0}}));
  }
}

TEST(Feasibility, EvenStepGivesBoundedEvidence) {
  // Oracle: from x = 0 the guard holds for 1000 iterations of x += 2.
  int x = 0;
  bool guard_held = true;
  for (int k = 0; k < 1000; ++k) {
    guard_held = guard_held && (x % 2 == 0);
    x += 2;
  }
  ASSERT_TRUE(guard_held);
  auto r = check_fixture("even_step.c", "even_step.json");
  ASSERT_TRUE(std::holds_alternative<BoundedEvidence>(r)) << describe(r);
  EXPECT_EQ(std::get<BoundedEvidence>(r).cycles, 1000u);
  EXPECT_EQ(std::get<BoundedEvidence>(r).assignment.values.at(0).second, 0);
}

TEST(Feasibility, OddAssumptionIsInfeasibleAtE2) {
  // Oracle: no x in the domain satisfies both guard and assumption.
  for (int x = -64; x <= 64; ++x) ASSERT_FALSE(x % 2 == 0 && x % 2 == 1);
  auto r = check_fixture("even_step.c", "even_step.odd_assumption.json");
  ASSERT_TRUE(std::holds_alternative<Infeasible>(r)) << describe(r);
  EXPECT_EQ(std::get<Infeasible>(r).edge_id, "E2");
}

TEST(Feasibility, ComplementGuard) {
  auto r = check_fixture("complement_guard.c", "complement_guard.json");
  ASSERT_TRUE(std::holds_alternative<ProvenInfinite>(r)) << describe(r);
  // The repeating state has x < 0 and y == ~x > 0.
  const auto& a = std::get<ProvenInfinite>(r).assignment.values;
  ASSERT_EQ(a.size(), 2u);
  EXPECT_LT(a[0].second, 0);
  EXPECT_EQ(a[1].second, ~a[0].second);
}

TEST(Feasibility, StuckAtMinusFive) {
  auto good = check_fixture("stuck_at_minus5.c", "stuck_at_minus5.correct.json");
  ASSERT_TRUE(std::holds_alternative<ProvenInfinite>(good)) << describe(good);
  EXPECT_EQ(std::get<ProvenInfinite>(good).rendered_state, "i=-5");
  // Closing the cycle at line 11 demands i = i+1 each round, which the
  // stuck state never executes.
  auto bad = check_fixture("stuck_at_minus5.c", "stuck_at_minus5.wrong.json");
  EXPECT_TRUE(std::holds_alternative<Infeasible>(bad)) << describe(bad);
}

TEST(Feasibility, UnsupportedProgram) {
  auto parsed = cparse::parse_program(fixture("programs/heap.c"));
  auto w = witness_from_text(fixture("witnesses/even_step.json"));
  auto r = check_feasibility(parsed, must_lasso(w));
  ASSERT_TRUE(std::holds_alternative<Unknown>(r));
  EXPECT_EQ(std::get<Unknown>(r).reason, Unknown::Reason::Unsupported);
}

TEST(Feasibility, BudgetExhaustionIsNeverInfeasible) {
  CheckerConfig cfg;
  cfg.max_steps = 3;
  auto r = check_fixture("stuck_at_minus5.c", "stuck_at_minus5.wrong.json", cfg);
  ASSERT_TRUE(std::holds_alternative<Unknown>(r)) << describe(r);
  EXPECT_EQ(std::get<Unknown>(r).reason, Unknown::Reason::BudgetExhausted);

  CheckerConfig few;
  few.max_assignments = 3;
  auto c = check_fixture("stuck_at_minus5.c", "stuck_at_minus5.wrong.json", few);
  ASSERT_TRUE(std::holds_alternative<Unknown>(c)) << describe(c);
  EXPECT_EQ(std::get<Unknown>(c).reason, Unknown::Reason::AssignmentCap);
}

TEST(Feasibility, DomainRestrictionCanHideTheWitness) {
  CheckerConfig cfg;
  cfg.domain_lo = 0;
  cfg.domain_hi = 10;
  auto r = check_fixture("stuck_at_minus5.c", "stuck_at_minus5.correct.json", cfg);
  EXPECT_TRUE(std::holds_alternative<Infeasible>(r)) << describe(r);
  cfg.domain_overrides["i"] = {-5, -5};
  EXPECT_TRUE(std::holds_alternative<ProvenInfinite>(
      check_fixture("stuck_at_minus5.c", "stuck_at_minus5.correct.json", cfg)));
}

TEST(Feasibility, NondetInsideCycleBlocksProof) {
  cparse::Program p = program_from_text(
      "extern int __VERIFIER_nondet_int(void);\n"
      "int main() {\n"
      "  int x = 0;\n"
      "  while (x < 100) {\n"
      "    x = __VERIFIER_nondet_int();\n"
      "  }\n"
      "  return 0;\n"
      "}\n");
  WitnessAutomaton w = witness_from_text(R"({"verdict": false, "witness": {
    "nodes": [{"id": "N1", "entry": true}, {"id": "N0", "cyclehead": true}, {"id": "N2"}],
    "edges": [{"id": "E0", "source": "N1", "target": "N0", "line": 3, "sourcecode": "int x = 0;"},
              {"id": "E1", "source": "N0", "target": "N2", "line": 4, "control": "condition-true", "sourcecode": "while"},
              {"id": "E2", "source": "N2", "target": "N0", "line": 5, "sourcecode": "x = nondet"}]}})");
  CheckerConfig cfg;
  cfg.bounded_cycle_target = 50;
  auto r = check_feasibility(p, must_lasso(w), cfg);
  ASSERT_TRUE(std::holds_alternative<BoundedEvidence>(r)) << describe(r);
  EXPECT_EQ(std::get<BoundedEvidence>(r).cycles, 50u);
}

TEST(Feasibility, AssumptionOnAssignmentConstrainsNondet) {
  cparse::Program p = program_from_text(fixture("programs/stuck_at_minus5.c"));
  WitnessAutomaton w = witness_from_text(fixture("witnesses/stuck_at_minus5.correct.json"));
  w.edges[1].assumption = "i == -3;";
  // i = -3 walks up to 0 and leaves the loop.
  auto r = check_feasibility(p, must_lasso(w));
  ASSERT_TRUE(std::holds_alternative<Infeasible>(r)) << describe(r);
  w.edges[1].assumption = "i == -5";
  EXPECT_TRUE(std::holds_alternative<ProvenInfinite>(check_feasibility(p, must_lasso(w))));
}

TEST(Feasibility, UnparseableAssumption) {
  cparse::Program p = program_from_text(fixture("programs/stuck_at_minus5.c"));
  WitnessAutomaton w = witness_from_text(fixture("witnesses/stuck_at_minus5.correct.json"));
  w.edges[2].assumption = "\\result == 0";
  auto r = check_feasibility(p, must_lasso(w));
  ASSERT_TRUE(std::holds_alternative<Unknown>(r));
  EXPECT_EQ(std::get<Unknown>(r).reason, Unknown::Reason::BadAssumption);
}

// Random counter loops with known ground truth.
TEST(Feasibility, SoundOnGeneratedLoops) {
  testgen::LoopGenerator gen(2024);
  CheckerConfig cfg;
  int proven = 0;
  for (int k = 0; k < 60; ++k) {
    auto c = gen.next();
    cparse::Program p = program_from_text(c.source);
    auto r = check_feasibility(p, must_lasso(witness_from_text(c.witness_json)), cfg);
    if (c.diverges) {
      EXPECT_FALSE(std::holds_alternative<Infeasible>(r)) << c.source << describe(r);
      proven += std::holds_alternative<ProvenInfinite>(r);
    } else {
      EXPECT_FALSE(std::holds_alternative<ProvenInfinite>(r)) << c.source << describe(r);
      EXPECT_FALSE(std::holds_alternative<BoundedEvidence>(r)) << c.source << describe(r);
    }
  }
  EXPECT_GT(proven, 0);
}

TEST(Feasibility, EnlargingDomainKeepsProofs) {
  testgen::LoopGenerator gen(77);
  for (int k = 0; k < 30; ++k) {
    auto c = gen.next();
    if (!c.diverges) continue;
    cparse::Program p = program_from_text(c.source);
    LassoPath l = must_lasso(witness_from_text(c.witness_json));
    CheckerConfig small;
    small.domain_lo = small.domain_hi = c.diverging_input;
    ASSERT_TRUE(std::holds_alternative<ProvenInfinite>(check_feasibility(p, l, small)));
    for (std::int64_t wide : {8, 64, 100}) {
      CheckerConfig big;
      big.domain_lo = std::min<std::int64_t>(-wide, c.diverging_input);
      big.domain_hi = std::max<std::int64_t>(wide, c.diverging_input);
      big.max_steps = 400000;
      auto r = check_feasibility(p, l, big);
      EXPECT_FALSE(std::holds_alternative<Infeasible>(r)) << describe(r);
    }
  }
}

TEST(Validator, CommandLine) {
  ValidatorConfig cfg;
  cfg.validator_root = "/opt/uautomizer";
  auto argv = validator_command("/tasks/c/loop.c", "/tmp/w.graphml", cfg);
  EXPECT_EQ(argv, (std::vector<std::string>{"/opt/uautomizer/Ultimate.py", "--architecture",
                                            "32bit", "--spec", "/tasks/properties/termination.prp",
                                            "--file", "/tasks/c/loop.c", "--validate",
                                            "/tmp/w.graphml"}));
}

TEST(Validator, OutputInterpretation) {
  EXPECT_TRUE(std::holds_alternative<Validated>(interpret_validator_output("...\nResult:\nFALSE\n")));
  EXPECT_TRUE(std::holds_alternative<Rejected>(interpret_validator_output("Result:\nTRUE\n")));
  EXPECT_TRUE(std::holds_alternative<Validated>(
      interpret_validator_output("Result:\nFALSE(TERM)\n")));
  EXPECT_TRUE(std::holds_alternative<ToolError>(interpret_validator_output("Result:\nUNKNOWN\n")));
  EXPECT_TRUE(std::holds_alternative<ToolError>(interpret_validator_output("Exception in thread")));
}

TEST(Validator, MissingExecutable) {
  ValidatorConfig cfg;
  cfg.validator_root = "/nonexistent/dir";
  EXPECT_TRUE(std::holds_alternative<ToolError>(run_external_validator("a.c", "b.graphml", cfg)));
}

TEST(Validator, StubTool) {
  namespace fs = std::filesystem;
  fs::path root = fs::temp_directory_path() / ("termeval_stub_" + std::to_string(::getpid()));
  fs::create_directories(root);
  auto make_stub = [&](const std::string& body) {
    write_file_atomic((root / "Ultimate.py").string(), "#!/bin/sh\n" + body);
    fs::permissions(root / "Ultimate.py", fs::perms::owner_all);
  };
  ValidatorConfig cfg;
  cfg.validator_root = root.string();
  cfg.timeout = std::chrono::seconds(1);

  make_stub("echo \"$@\" > args.txt\necho Result:\necho FALSE\n");
  EXPECT_TRUE(std::holds_alternative<Validated>(run_external_validator("/t/a.c", "/t/w.graphml", cfg)));
  EXPECT_EQ(read_file((root / "args.txt").string()),
            "--architecture 32bit --spec /properties/termination.prp --file /t/a.c "
            "--validate /t/w.graphml\n");

  make_stub("echo Result:\necho TRUE\n");
  EXPECT_TRUE(std::holds_alternative<Rejected>(run_external_validator("/t/a.c", "/t/w.graphml", cfg)));

  make_stub("sleep 5\necho Result:\necho FALSE\n");
  auto t0 = std::chrono::steady_clock::now();
  auto r = run_external_validator("/t/a.c", "/t/w.graphml", cfg);
  EXPECT_TRUE(std::holds_alternative<ToolError>(r));
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(4));

  make_stub("echo boom >&2\nexit 3\n");
  EXPECT_TRUE(std::holds_alternative<ToolError>(run_external_validator("/t/a.c", "/t/w.graphml", cfg)));
  fs::remove_all(root);
}
