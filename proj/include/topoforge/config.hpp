#pragma once

// Run configuration: a JSON document validated against a fixed schema.
// Every error names the offending key path, e.g. "sweep.eps0" or "shapes[2]".

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "topoforge/geometry.hpp"

namespace topoforge {

enum class Command { solve, td_point, taylor, td_field };

// "solve", "td-point", "taylor", "td-field".
std::optional<Command> parse_command(const std::string& name);
const char* to_string(Command c);

struct MeshConfig {
  double h_coarse = 0.05;
  double h_fine = 0.05 / 32;      // design mesh near z
  double refine_radius = 0.1;
  double R = 1000.0;
  double grading = 1.8;
  double h_inclusion = 0.05;
  int rings_per_delta = 8;
  EllipseAxes ellipse_axes = EllipseAxes::semi;
  std::optional<bool> empty_omega;  // td-field defaults to true, other commands to false
};

struct SweepConfig {
  double eps0 = 0.005;
  double delta = 1.5;
  int count = 10;
  double noise_floor = 1e-12;
};

struct SolverConfig {
  double tol = 1e-10;
  double rel_tol = 1e-12;
  int max_iter = 60;
  double damping = 1.0;
  std::optional<int> load_steps;            // default: the example's value
  std::optional<double> corrector_damping;  // default: the example's value
};

struct RunConfig {
  Command command = Command::solve;
  std::string example = "example1";
  std::map<std::string, double> overrides;  // example parameters
  std::optional<Point> z;                   // default: the example's point
  std::vector<std::string> shapes;          // default: the example's list
  MeshConfig mesh;
  SweepConfig sweep;
  SolverConfig solver;
  std::string output = "topoforge-out";
  int threads = 1;

  bool empty_omega() const { return mesh.empty_omega.value_or(command == Command::td_field); }
};

// Throws ConfigError naming the first violation. A "command" key, when
// present, must equal `command`.
RunConfig parse_config(const nlohmann::json& doc, Command command);

// Fully resolved document (defaults filled in); parse_config(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& config);

// Applies "a.b.c=value": the value is parsed as JSON when possible and kept as
// a string otherwise. Intermediate objects are created. Throws ConfigError.
void apply_assignment(nlohmann::json& doc, const std::string& assignment);

// Throws IoError when unreadable, ConfigError("<file>") on malformed JSON.
nlohmann::json read_config_file(const std::string& path);

}  // namespace topoforge
