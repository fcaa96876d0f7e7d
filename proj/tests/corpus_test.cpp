#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "termeval/corpus.hpp"
#include "termeval/text.hpp"

using namespace termeval;
using namespace termeval::corpus;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::path(TERMEVAL_FIXTURES) / "corpus";

CorpusManifest load_fixture(LoadOptions opts = {}) {
  static HeuristicTokenCounter heuristic;
  if (!opts.tokens) opts.tokens = &heuristic;
  return load_manifest(kRoot, opts);
}

CorpusManifest synthetic(const std::vector<std::pair<std::string, std::uint64_t>>& counts) {
  CorpusManifest m;
  for (const auto& [id, n] : counts) {
    TaskSpec t;
    t.task_id = id;
    t.token_count = n;
    m.tasks.push_back(t);
  }
  return m;
}

}  // namespace

TEST(Manifest, LoadsTerminationTasksOnly) {
  auto m = load_fixture();
  std::vector<std::string> ids;
  for (const auto& t : m.tasks) ids.push_back(t.task_id);
  std::vector<std::string> want = {
      "termination-bv/sign_flip.yml",           "termination-heap/heap.yml",
      "termination-loops/counted_for.yml",      "termination-loops/even_step.yml",
      "termination-loops/loop_bounded_range.yml", "termination-other/complement_guard.yml",
      "termination-other/excluded.yml",         "termination-other/stuck_at_minus5.yml"};
  want.erase(std::find(want.begin(), want.end(), "termination-other/excluded.yml"));
  // excluded.yml only disappears with the exclusion list; without it it is a task
  EXPECT_EQ(ids.size(), want.size() + 1);
  auto with_excl = load_fixture({.exclusions = read_exclusions(kRoot / "exclusions.txt")});
  ids.clear();
  for (const auto& t : with_excl.tasks) ids.push_back(t.task_id);
  EXPECT_EQ(ids, want);
  EXPECT_EQ(with_excl.excluded, std::vector<std::string>{"termination-other/excluded.yml"});
  EXPECT_EQ(with_excl.unlisted, std::vector<std::string>{"stray/unlisted.yml"});
}

TEST(Manifest, CountsAndLabels) {
  auto m = load_fixture({.exclusions = {"termination-other/excluded.yml"}});
  EXPECT_EQ(m.category_counts[Category::MainControlFlow], 3u);
  EXPECT_EQ(m.category_counts[Category::BitVectors], 1u);
  EXPECT_EQ(m.category_counts[Category::MainHeap], 1u);
  EXPECT_EQ(m.category_counts[Category::Other], 2u);
  EXPECT_EQ(m.label_counts[witness::Verdict::T], 2u);
  EXPECT_EQ(m.label_counts[witness::Verdict::NT], 5u);
  std::uint64_t sum = 0;
  for (const auto& [_, n] : m.category_counts) sum += n;
  EXPECT_EQ(sum, m.tasks.size());
  for (const auto& t : m.tasks) EXPECT_TRUE(m.category_counts.count(t.category));
}

TEST(Manifest, MissingSourceIsReportedNotThrown) {
  auto m = load_fixture();
  ASSERT_EQ(m.errors.size(), 1u);
  EXPECT_EQ(m.errors[0].task_id, "termination-other/missing.yml");
  EXPECT_NE(m.errors[0].message.find("does_not_exist.c"), std::string::npos);
}

TEST(Manifest, TaskFields) {
  auto m = load_fixture();
  const TaskSpec* t = m.find("termination-bv/sign_flip.yml");
  ASSERT_TRUE(t);
  EXPECT_EQ(t->architecture, Architecture::Bits64);
  EXPECT_EQ(t->expected, witness::Verdict::NT);
  EXPECT_EQ(t->category, Category::BitVectors);
  EXPECT_EQ(t->source, read_file((kRoot / "termination-bv/sign_flip.c").string()));
  EXPECT_EQ(split_lines(t->numbered_source).size(), split_lines(t->source).size());
  EXPECT_EQ(strip_line_numbers(t->numbered_source), t->source);
  EXPECT_EQ(t->token_count, (fs::file_size(kRoot / "termination-bv/sign_flip.c") + 3) / 4);
  EXPECT_EQ(m.find("termination-heap/heap.yml")->expected, witness::Verdict::T);
  EXPECT_EQ(m.find("nope.yml"), nullptr);
}

TEST(Manifest, CategoryFilter) {
  auto m = load_fixture({.categories = {Category::MainHeap}});
  ASSERT_EQ(m.tasks.size(), 1u);
  EXPECT_EQ(m.tasks[0].task_id, "termination-heap/heap.yml");
  EXPECT_TRUE(m.errors.empty());
}

TEST(Manifest, EmptyDirectoryIsEmptyManifest) {
  fs::path dir = fs::temp_directory_path() / "termeval_empty_corpus";
  fs::create_directories(dir);
  HeuristicTokenCounter h;
  auto m = load_manifest(dir, {.tokens = &h});
  EXPECT_TRUE(m.tasks.empty());
  EXPECT_TRUE(m.errors.empty());
  fs::remove_all(dir);
}

TEST(Manifest, UnreadableRootAndMissingCounter) {
  HeuristicTokenCounter h;
  EXPECT_THROW(load_manifest("/nonexistent/termeval", {.tokens = &h}), std::runtime_error);
  EXPECT_THROW(load_manifest(kRoot, {}), ConfigError);
}

TEST(Manifest, ReingestIsByteIdenticalAndParallelSafe) {
  auto a = manifest_to_json(load_fixture()).dump(2);
  auto b = manifest_to_json(load_fixture()).dump(2);
  auto c = manifest_to_json(load_fixture({.jobs = 4})).dump(2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Manifest, JsonRoundTrip) {
  auto m = load_fixture({.exclusions = {"termination-other/excluded.yml"}});
  auto back = manifest_from_json(manifest_to_json(m));
  ASSERT_EQ(back.tasks.size(), m.tasks.size());
  for (std::size_t i = 0; i < m.tasks.size(); ++i) {
    EXPECT_EQ(back.tasks[i].task_id, m.tasks[i].task_id);
    EXPECT_EQ(back.tasks[i].numbered_source, m.tasks[i].numbered_source);
    EXPECT_EQ(back.tasks[i].token_count, m.tasks[i].token_count);
    EXPECT_EQ(back.tasks[i].category, m.tasks[i].category);
  }
  EXPECT_EQ(manifest_to_json(back).dump(), manifest_to_json(m).dump());
}

TEST(Tokens, HeuristicAndSidecar) {
  HeuristicTokenCounter h;
  EXPECT_EQ(count_tokens("x", "", &h), 0u);
  EXPECT_EQ(count_tokens("x", "abcd", &h), 1u);
  EXPECT_EQ(count_tokens("x", "abcde", &h), 2u);
  EXPECT_EQ(count_tokens("x", "abcde", &h), count_tokens("x", "abcde", &h));
  EXPECT_THROW(count_tokens("x", "a", nullptr), ConfigError);

  auto s = SidecarTokenCounter::load(kRoot / "tokens.json");
  EXPECT_EQ(s.count("termination-loops/counted_for.yml", ""), 45u);
  EXPECT_THROW(s.count("termination-heap/heap.yml", ""), ConfigError);
  auto m = load_fixture({.categories = {Category::MainControlFlow}, .tokens = &s});
  EXPECT_EQ(m.tasks.size(), 2u);  // even_step has no sidecar count
  ASSERT_EQ(m.errors.size(), 1u);
  EXPECT_EQ(m.errors[0].task_id, "termination-loops/even_step.yml");

  fs::path tsv = fs::temp_directory_path() / "termeval_tokens.tsv";
  write_file_atomic(tsv.string(), "# id\tcount\na.yml\t7\nb.yml\t96827\n");
  auto t = SidecarTokenCounter::load(tsv);
  EXPECT_EQ(t.count("b.yml", ""), 96827u);
  write_file_atomic(tsv.string(), "a.yml\t-1\n");
  EXPECT_THROW(SidecarTokenCounter::load(tsv), ConfigError);
  fs::remove(tsv);
}

TEST(Exclusions, CommentsAndBlankLines) {
  auto e = parse_exclusions("# header\n\n  a/b.yml  \nc.yml # trailing\r\n");
  EXPECT_EQ(e, (std::set<std::string>{"a/b.yml", "c.yml"}));
}

TEST(Bins, FixtureCorpus) {
  auto m = load_fixture({.exclusions = {"termination-other/excluded.yml"}});
  auto b = assign_length_bins(m);
  // 7 tasks -> 3/2/2, ordered by ceil(bytes/4)
  std::vector<std::pair<std::uint64_t, std::string>> order;
  for (const auto& t : m.tasks)
    order.emplace_back((fs::file_size(t.source_path) + 3) / 4, t.task_id);
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < order.size(); ++i)
    EXPECT_EQ(b.assignment.at(order[i].second), i < 3 ? 0 : i < 5 ? 1 : 2) << order[i].second;
  EXPECT_EQ(b.bin_edges[0], order[2].first);
  EXPECT_EQ(b.bin_edges[1], order[4].first);
}

TEST(Bins, SizesAndTies) {
  auto nine = assign_length_bins(synthetic(
      {{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4}, {"e", 5}, {"f", 6}, {"g", 7}, {"h", 8}, {"i", 9}}));
  std::array<int, 3> sizes{};
  for (const auto& [_, bin] : nine.assignment) ++sizes[bin];
  EXPECT_EQ(sizes, (std::array<int, 3>{3, 3, 3}));

  std::vector<std::pair<std::string, std::uint64_t>> ten;
  for (int i = 0; i < 10; ++i) ten.emplace_back("t" + std::to_string(i), 100 - i);
  sizes = {};
  for (const auto& [_, bin] : assign_length_bins(synthetic(ten)).assignment) ++sizes[bin];
  EXPECT_EQ(sizes, (std::array<int, 3>{4, 3, 3}));

  auto ties = assign_length_bins(synthetic({{"z", 5}, {"y", 5}, {"x", 5}}));
  EXPECT_EQ(ties.assignment.at("x"), 0);
  EXPECT_EQ(ties.assignment.at("y"), 1);
  EXPECT_EQ(ties.assignment.at("z"), 2);
  EXPECT_THROW(assign_length_bins(synthetic({{"a", 1}, {"b", 2}})), std::invalid_argument);
}

TEST(Bins, RandomPartitionsAreTotalBalancedAndMonotone) {
  std::mt19937_64 rng(21);
  for (int iter = 0; iter < 200; ++iter) {
    int n = std::uniform_int_distribution<int>(3, 60)(rng);
    std::vector<std::pair<std::string, std::uint64_t>> tasks;
    for (int i = 0; i < n; ++i)
      tasks.emplace_back("t" + std::to_string(i), std::uniform_int_distribution<int>(1, 20)(rng));
    auto m = synthetic(tasks);
    auto b = assign_length_bins(m);
    ASSERT_EQ(b.assignment.size(), static_cast<std::size_t>(n));
    std::array<int, 3> sizes{};
    for (const auto& [_, bin] : b.assignment) ++sizes[bin];
    EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) -
                  *std::min_element(sizes.begin(), sizes.end()), 1);
    EXPECT_GE(sizes[0], sizes[1]);
    EXPECT_GE(sizes[1], sizes[2]);
    for (const auto& a : m.tasks)
      for (const auto& c : m.tasks)
        if (b.assignment[a.task_id] < b.assignment[c.task_id])
          EXPECT_LE(a.token_count, c.token_count);
  }
}

TEST(Report, CategoryTable) {
  auto m = load_fixture({.exclusions = {"termination-other/excluded.yml"}});
  std::string table = category_table(m);
  EXPECT_NE(table.find("MainControlFlow"), std::string::npos);
  EXPECT_NE(table.find("total                   7"), std::string::npos);
}
