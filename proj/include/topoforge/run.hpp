#pragma once

// Command execution: artifacts and a manifest in the output directory.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "topoforge/config.hpp"

namespace topoforge {

// Exit statuses of the command-line tool.
enum ExitCode : int {
  exit_ok = 0,
  exit_internal = 1,
  exit_config = 2,
  exit_solver = 3,
  exit_io = 4,
};

struct RunResult {
  int exit_code = exit_ok;
  std::string message;   // empty on success
  std::string stage;     // failing stage or config path
  std::string output_dir;
  std::vector<std::string> artifacts;  // file names relative to output_dir, manifest last
};

// Output directory: $TOPOFORGE_OUTPUT when set, else config.output.
std::string resolve_output_dir(const std::string& configured);

// Runs a validated config. Throws the library errors (ConfigError, SolverError,
// MeshError, EvaluationError, IoError); the manifest is written on success only.
RunResult execute(const RunConfig& config, std::ostream& log);

// Reads and validates the config (assignments and thread override applied
// first), runs it, and maps failures to exit statuses. Never throws. A
// manifest recording the outcome is written whenever the output directory is
// usable.
RunResult run(Command command, const std::string& config_path, const std::vector<std::string>& assignments,
              std::optional<int> threads, std::ostream& log);

}  // namespace topoforge
