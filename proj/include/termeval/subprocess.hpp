#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace termeval {

struct ProcessResult {
  bool spawned = false;    // false when the executable could not be started
  bool timed_out = false;  // the process group was killed
  int exit_code = -1;      // -1 when killed by a signal
  std::string output;      // stdout and stderr, interleaved
};

/// Run argv[0] (searched in PATH when it has no slash) with the given stdin
/// text. The child runs in its own process group, killed on timeout.
ProcessResult run_process(const std::vector<std::string>& argv, const std::string& stdin_text,
                          std::chrono::milliseconds timeout,
                          const std::optional<std::string>& cwd = std::nullopt);

}  // namespace termeval
