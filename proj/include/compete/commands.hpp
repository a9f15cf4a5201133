#pragma once

// CLI subcommands. Each writes its reports into `out_dir` (also on failure)
// and returns the process exit code: 0 success, 1 configuration or
// precondition error, 2 hypothesis failure, 3 solver failure.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "compete/problem.hpp"

namespace compete {

struct CommandOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> levels;
  std::ostream* log = nullptr;  // one-line progress messages
};

/// Applies --seed and --levels to a parsed spec.
ProblemSpec with_overrides(ProblemSpec spec, const CommandOptions& opts);

int cmd_solve(const ProblemSpec& spec, const CommandOptions& opts);
int cmd_check(const ProblemSpec& spec, const CommandOptions& opts);
int cmd_constants(const ProblemSpec& spec, const CommandOptions& opts);
int cmd_study(const ProblemSpec& spec, const CommandOptions& opts);

}  // namespace compete
