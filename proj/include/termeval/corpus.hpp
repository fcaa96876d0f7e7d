#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "termeval/witness.hpp"

namespace termeval::corpus {

enum class Category { BitVectors, MainControlFlow, MainHeap, Other };
enum class Architecture { Bits32, Bits64 };

inline constexpr std::array<Category, 4> kCategories = {
    Category::BitVectors, Category::MainControlFlow, Category::MainHeap, Category::Other};

std::string_view to_string(Category c);
std::optional<Category> category_from_string(std::string_view s);
std::string_view to_string(Architecture a);

struct TaskSpec {
  std::string task_id;  // yml path relative to the corpus root
  std::filesystem::path source_path;
  std::string source;
  std::string numbered_source;
  Category category = Category::Other;
  witness::Verdict expected = witness::Verdict::T;
  Architecture architecture = Architecture::Bits32;
  std::uint64_t token_count = 0;
};

struct IngestError {
  std::string task_id;
  std::string message;
};

struct CorpusManifest {
  std::filesystem::path root;
  std::vector<TaskSpec> tasks;  // sorted by task_id
  std::map<Category, std::uint64_t> category_counts;
  std::map<witness::Verdict, std::uint64_t> label_counts;
  std::vector<std::string> excluded;  // ids dropped by the exclusion list
  std::vector<std::string> unlisted;  // termination tasks in no category set
  std::vector<IngestError> errors;

  const TaskSpec* find(std::string_view task_id) const;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual std::string name() const = 0;
  /// Throws ConfigError when the counter has no value for the task.
  virtual std::uint64_t count(std::string_view task_id, std::string_view source) const = 0;
};

/// ceil(bytes / 4)
class HeuristicTokenCounter : public TokenCounter {
 public:
  std::string name() const override { return "heuristic-bytes/4"; }
  std::uint64_t count(std::string_view task_id, std::string_view source) const override;
};

/// Counts precomputed by an external tokenizer. The sidecar is a JSON
/// object {task_id: count} or lines of "task_id<TAB>count".
class SidecarTokenCounter : public TokenCounter {
 public:
  explicit SidecarTokenCounter(std::map<std::string, std::uint64_t> counts)
      : counts_(std::move(counts)) {}
  static SidecarTokenCounter load(const std::filesystem::path& path);
  std::string name() const override { return "sidecar"; }
  std::uint64_t count(std::string_view task_id, std::string_view source) const override;

 private:
  std::map<std::string, std::uint64_t> counts_;
};

std::uint64_t count_tokens(std::string_view task_id, std::string_view source,
                           const TokenCounter* counter);

/// One task id per line; `#` starts a comment.
std::set<std::string> read_exclusions(const std::filesystem::path& path);
std::set<std::string> parse_exclusions(std::string_view text);

struct LoadOptions {
  std::set<Category> categories{kCategories.begin(), kCategories.end()};
  std::set<std::string> exclusions;
  const TokenCounter* tokens = nullptr;
  unsigned jobs = 1;
};

/// Scans `root` for task YAML files with a termination property. Categories
/// come from Termination-<Category>.set files in the root, whose lines are
/// glob patterns over yml paths. Termination tasks matched by no set are
/// listed as unlisted and left out. Throws std::runtime_error when the root cannot be read and
/// ConfigError when no token counter is given.
CorpusManifest load_manifest(const std::filesystem::path& root, const LoadOptions& opts);

struct LengthBinning {
  std::array<std::uint64_t, 2> bin_edges{};  // largest token count in bins 0 and 1
  std::map<std::string, int> assignment;
};

/// Throws std::invalid_argument for fewer than 3 tasks.
LengthBinning assign_length_bins(const CorpusManifest& m);

nlohmann::json manifest_to_json(const CorpusManifest& m);
/// Reloads sources from disk; a missing source throws std::runtime_error.
CorpusManifest manifest_from_json(const nlohmann::json& j);

std::string category_table(const CorpusManifest& m);

}  // namespace termeval::corpus
