#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "topoforge/run.hpp"

int main(int argc, char** argv) {
  using namespace topoforge;
  CLI::App app{"Topological derivatives of transmission problems: state solves, pointwise TD, Taylor tests, TD maps"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::vector<std::string> assignments;
  int threads = 0;
  for (const char* name : {"solve", "td-point", "taylor", "td-field"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--set", assignments, "override a config key, e.g. sweep.count=6 (repeatable)");
    sub->add_option("--threads", threads, "worker threads (overrides the config)")->check(CLI::Range(1, 256));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const RunResult result = run(*parse_command(name), config_path, assignments,
                               threads > 0 ? std::optional<int>(threads) : std::nullopt, std::cerr);
  return result.exit_code;
}
