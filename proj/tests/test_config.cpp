#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "topoforge/config.hpp"
#include "topoforge/error.hpp"

using namespace topoforge;
using nlohmann::json;

namespace {

std::string error_path(const json& doc, Command command) {
  try {
    parse_config(doc, command);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<accepted>";
}

}  // namespace

TEST_CASE("defaults follow the stated values") {
  const RunConfig c = parse_config(json::object(), Command::taylor);
  CHECK(c.example == "example1");
  CHECK(c.mesh.R == 1000.0);
  CHECK(c.sweep.eps0 == 0.005);
  CHECK(c.sweep.delta == 1.5);
  CHECK(c.sweep.count == 10);
  CHECK(c.sweep.noise_floor == 1e-12);
  CHECK_FALSE(c.solver.load_steps);
  CHECK_FALSE(c.empty_omega());
  CHECK(parse_config(json::object(), Command::td_field).empty_omega());
}

TEST_CASE("commands") {
  for (Command c : {Command::solve, Command::td_point, Command::taylor, Command::td_field})
    CHECK(parse_command(to_string(c)) == c);
  CHECK(parse_command("td-point") == Command::td_point);
  CHECK_FALSE(parse_command("td_point"));
  CHECK(error_path({{"command", "taylor"}}, Command::solve) == "command");
}

TEST_CASE("errors name the offending key") {
  CHECK(error_path({{"shapes", {"disk", "hexagon"}}}, Command::td_point) == "shapes[1]");
  CHECK(error_path({{"sweep", {{"eps0", -1.0}}}}, Command::taylor) == "sweep.eps0");
  CHECK(error_path({{"sweep", {{"delta", 1.0}}}}, Command::taylor) == "sweep.delta");
  CHECK(error_path({{"sweep", {{"count", 2.5}}}}, Command::taylor) == "sweep.count");
  CHECK(error_path({{"mesh", {{"hcoarse", 0.1}}}}, Command::solve) == "mesh.hcoarse");
  CHECK(error_path({{"mesh", {{"grading", 1.0}}}}, Command::solve) == "mesh.grading");
  CHECK(error_path({{"mesh", {{"ellipse_axes", "major"}}}}, Command::solve) == "mesh.ellipse_axes");
  CHECK(error_path({{"example", "example3"}}, Command::solve) == "example");
  CHECK(error_path({{"overrides", {{"beta9", 1.0}}}}, Command::solve) == "overrides.beta9");
  CHECK(error_path({{"overrides", {{"beta1", "one"}}}}, Command::solve) == "overrides.beta1");
  CHECK(error_path({{"solver", {{"damping", 0.0}}}}, Command::solve) == "solver.damping");
  CHECK(error_path({{"z", {0.0}}}, Command::td_point) == "z");
  CHECK(error_path({{"z", {0.0, -0.5}}}, Command::td_point) == "z");
  CHECK(error_path({{"z", {5.0, 0.0}}}, Command::taylor) == "z");
  CHECK(error_path({{"threads", 0}}, Command::solve) == "threads");
  CHECK(error_path({{"unknown", 1}}, Command::solve) == "unknown");
  CHECK(error_path(json::array(), Command::solve) == "<root>");
}

TEST_CASE("a point inside Omega is fine once Omega is removed") {
  CHECK(error_path({{"z", {0.0, -0.5}}, {"mesh", {{"empty_omega", true}}}}, Command::td_point) == "<accepted>");
}

TEST_CASE("resolved documents round-trip") {
  const json doc = {{"example", "example5"},
                    {"shapes", {"disk", "ellipse"}},
                    {"z", {1.2, 0.4}},
                    {"overrides", {{"E1", 0.2}}},
                    {"sweep", {{"count", 6}}},
                    {"solver", {{"load_steps", 5}}},
                    {"mesh", {{"ellipse_axes", "full"}}}};
  const RunConfig c = parse_config(doc, Command::taylor);
  const json resolved = to_json(c);
  CHECK(to_json(parse_config(resolved, Command::taylor)) == resolved);
  CHECK(c.overrides.at("E1") == 0.2);
  CHECK(*c.solver.load_steps == 5);
  CHECK(c.mesh.ellipse_axes == EllipseAxes::full);
  CHECK(to_json(parse_config(to_json(parse_config(json::object(), Command::solve)), Command::solve)) ==
        to_json(parse_config(json::object(), Command::solve)));
}

TEST_CASE("assignments") {
  json doc = json::object();
  apply_assignment(doc, "sweep.count=4");
  apply_assignment(doc, "example=example2");
  apply_assignment(doc, "z=[0.1,0.6]");
  apply_assignment(doc, "overrides.beta1=3");
  CHECK(doc["sweep"]["count"] == 4);
  CHECK(doc["example"] == "example2");
  const RunConfig c = parse_config(doc, Command::td_point);
  CHECK(c.sweep.count == 4);
  CHECK((*c.z)[1] == 0.6);
  CHECK(c.overrides.at("beta1") == 3.0);
  CHECK_THROWS_AS(apply_assignment(doc, "novalue"), ConfigError);
  CHECK_THROWS_AS(apply_assignment(doc, "=3"), ConfigError);
}

TEST_CASE("config files") {
  const auto dir = std::filesystem::temp_directory_path() / "topoforge_config_test";
  std::filesystem::create_directories(dir);
  const auto good = (dir / "good.json").string(), bad = (dir / "bad.json").string();
  std::ofstream(good) << "{\n  // comment\n  \"example\": \"example4\"\n}\n";
  std::ofstream(bad) << "{ \"example\": ";
  CHECK(read_config_file(good)["example"] == "example4");
  CHECK_THROWS_AS(read_config_file(bad), ConfigError);
  CHECK_THROWS_AS(read_config_file((dir / "missing.json").string()), IoError);
  std::filesystem::remove_all(dir);
}
