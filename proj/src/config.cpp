#include "topoforge/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "topoforge/error.hpp"
#include "topoforge/problem.hpp"

namespace topoforge {

using nlohmann::json;

std::optional<Command> parse_command(const std::string& name) {
  if (name == "solve") return Command::solve;
  if (name == "td-point") return Command::td_point;
  if (name == "taylor") return Command::taylor;
  if (name == "td-field") return Command::td_field;
  return std::nullopt;
}

const char* to_string(Command c) {
  switch (c) {
    case Command::solve: return "solve";
    case Command::td_point: return "td-point";
    case Command::taylor: return "taylor";
    case Command::td_field: return "td-field";
  }
  return "?";
}

namespace {

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Reads keys of one JSON object, remembering which were consumed.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  double number(const std::string& key, double fallback, double lo, double hi, bool open_lo = false) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(path(key), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x) || x < lo || x > hi || (open_lo && x == lo))
      throw ConfigError(path(key), "value " + v->dump() + " outside " + (open_lo ? "(" : "[") + num(lo) + ", " +
                                       num(hi) + "]");
    return x;
  }

  std::optional<double> optional_number(const std::string& key, double lo, double hi, bool open_lo = false) {
    if (!find(key)) return std::nullopt;
    return number(key, 0.0, lo, hi, open_lo);
  }

  int integer(const std::string& key, int fallback, int lo, int hi) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) throw ConfigError(path(key), "expected an integer");
    const long long x = v->get<long long>();
    if (x < lo || x > hi)
      throw ConfigError(path(key), "value " + v->dump() + " outside [" + std::to_string(lo) + ", " +
                                       std::to_string(hi) + "]");
    return static_cast<int>(x);
  }

  std::optional<int> optional_integer(const std::string& key, int lo, int hi) {
    if (!find(key)) return std::nullopt;
    return integer(key, 0, lo, hi);
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(path(key), "expected a string");
    return v->get<std::string>();
  }

  std::optional<bool> optional_bool(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) throw ConfigError(path(key), "expected true or false");
    return v->get<bool>();
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) throw ConfigError(path(key), "unknown key");
  }

 private:
  static std::string num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

const json empty_object = json::object();

const json& section(ObjectReader& r, const std::string& key) {
  const json* v = r.find(key);
  return v ? *v : empty_object;
}

}  // namespace

RunConfig parse_config(const json& doc, Command command) {
  ObjectReader root(doc, "");
  RunConfig c;
  c.command = command;
  if (const json* v = root.find("command")) {
    if (!v->is_string()) throw ConfigError("command", "expected a string");
    const auto named = parse_command(v->get<std::string>());
    if (!named) throw ConfigError("command", "unknown command " + v->dump());
    if (*named != command)
      throw ConfigError("command", std::string("config is for ") + to_string(*named) + ", invoked as " +
                                       to_string(command));
  }

  c.example = root.string("example", c.example);
  const auto& names = example_names();
  if (std::find(names.begin(), names.end(), c.example) == names.end())
    throw ConfigError("example", "unknown example \"" + c.example + "\"");

  if (const json* ov = root.find("overrides")) {
    if (!ov->is_object()) throw ConfigError("overrides", "expected an object");
    const auto known = example_parameters(c.example);
    for (const auto& [key, value] : ov->items()) {
      const std::string path = "overrides." + key;
      if (!known.count(key)) throw ConfigError(path, "not a parameter of " + c.example);
      if (!value.is_number() || !std::isfinite(value.get<double>())) throw ConfigError(path, "expected a number");
      c.overrides[key] = value.get<double>();
    }
  }

  ObjectReader mesh(section(root, "mesh"), "mesh");
  c.mesh.h_coarse = mesh.number("h_coarse", c.mesh.h_coarse, 0.0, 1.0, true);
  c.mesh.h_fine = mesh.number("h_fine", c.mesh.h_fine, 0.0, c.mesh.h_coarse, true);
  c.mesh.refine_radius = mesh.number("refine_radius", c.mesh.refine_radius, 0.0, 10.0);
  c.mesh.R = mesh.number("R", c.mesh.R, 16.0, 1e6);
  c.mesh.grading = mesh.number("grading", c.mesh.grading, 1.0, 4.0, true);
  c.mesh.h_inclusion = mesh.number("h_inclusion", c.mesh.h_inclusion, 0.0, 1.0, true);
  c.mesh.rings_per_delta = mesh.integer("rings_per_delta", c.mesh.rings_per_delta, 2, 64);
  if (c.mesh.rings_per_delta % 2) throw ConfigError("mesh.rings_per_delta", "must be even");
  const std::string axes = mesh.string("ellipse_axes", "semi");
  if (axes == "semi")
    c.mesh.ellipse_axes = EllipseAxes::semi;
  else if (axes == "full")
    c.mesh.ellipse_axes = EllipseAxes::full;
  else
    throw ConfigError("mesh.ellipse_axes", "expected \"semi\" or \"full\"");
  c.mesh.empty_omega = mesh.optional_bool("empty_omega");
  mesh.finish();

  ObjectReader sweep(section(root, "sweep"), "sweep");
  c.sweep.eps0 = sweep.number("eps0", c.sweep.eps0, 0.0, 1.0, true);
  c.sweep.delta = sweep.number("delta", c.sweep.delta, 1.0, 10.0, true);
  c.sweep.count = sweep.integer("count", c.sweep.count, 2, 40);
  c.sweep.noise_floor = sweep.number("noise_floor", c.sweep.noise_floor, 0.0, 1.0);
  sweep.finish();

  ObjectReader solver(section(root, "solver"), "solver");
  c.solver.tol = solver.number("tol", c.solver.tol, 0.0, 1.0, true);
  c.solver.rel_tol = solver.number("rel_tol", c.solver.rel_tol, 0.0, 1.0);
  c.solver.max_iter = solver.integer("max_iter", c.solver.max_iter, 1, 100000);
  c.solver.damping = solver.number("damping", c.solver.damping, 0.0, 1.0, true);
  c.solver.load_steps = solver.optional_integer("load_steps", 1, 10000);
  c.solver.corrector_damping = solver.optional_number("corrector_damping", 0.0, 1.0, true);
  solver.finish();

  c.output = root.string("output", c.output);
  if (c.output.empty()) throw ConfigError("output", "must not be empty");
  c.threads = root.integer("threads", c.threads, 1, 256);

  // Geometry-dependent checks need the problem itself (no solves).
  const ProblemSpec spec = build_example(c.example, c.overrides);
  if (const json* z = root.find("z")) {
    if (!z->is_array() || z->size() != 2 || !(*z)[0].is_number() || !(*z)[1].is_number())
      throw ConfigError("z", "expected [x, y]");
    c.z = make_point((*z)[0].get<double>(), (*z)[1].get<double>());
  }
  if (command == Command::td_point || command == Command::taylor) {
    const Point z = c.z.value_or(spec.default_z);
    if (!spec.geometry.contains(z)) throw ConfigError("z", "point lies outside the domain");
    if (!c.empty_omega() && (spec.in_omega(z) || spec.geometry.distance_to_omega(z) == 0.0))
      throw ConfigError("z", "point lies in the closure of Omega");
  }
  if (const json* shapes = root.find("shapes")) {
    if (!shapes->is_array() || shapes->empty()) throw ConfigError("shapes", "expected a non-empty list");
    for (std::size_t i = 0; i < shapes->size(); ++i) {
      const std::string path = "shapes[" + std::to_string(i) + "]";
      if (!(*shapes)[i].is_string()) throw ConfigError(path, "expected a shape name");
      const std::string name = (*shapes)[i].get<std::string>();
      try {
        InclusionShape::named(name, c.mesh.ellipse_axes);
      } catch (const std::invalid_argument&) {
        throw ConfigError(path, "unknown shape \"" + name + "\"");
      }
      c.shapes.push_back(name);
    }
  }
  root.finish();
  return c;
}

json to_json(const RunConfig& c) {
  json doc;
  doc["command"] = to_string(c.command);
  doc["example"] = c.example;
  doc["overrides"] = json::object();
  for (const auto& [k, v] : c.overrides) doc["overrides"][k] = v;
  doc["z"] = c.z ? json::array({(*c.z)[0], (*c.z)[1]}) : json(nullptr);
  doc["shapes"] = c.shapes.empty() ? json(nullptr) : json(c.shapes);
  doc["mesh"] = {{"h_coarse", c.mesh.h_coarse},
                 {"h_fine", c.mesh.h_fine},
                 {"refine_radius", c.mesh.refine_radius},
                 {"R", c.mesh.R},
                 {"grading", c.mesh.grading},
                 {"h_inclusion", c.mesh.h_inclusion},
                 {"rings_per_delta", c.mesh.rings_per_delta},
                 {"ellipse_axes", c.mesh.ellipse_axes == EllipseAxes::semi ? "semi" : "full"},
                 {"empty_omega", c.empty_omega()}};
  doc["sweep"] = {{"eps0", c.sweep.eps0},
                  {"delta", c.sweep.delta},
                  {"count", c.sweep.count},
                  {"noise_floor", c.sweep.noise_floor}};
  doc["solver"] = {{"tol", c.solver.tol},
                   {"rel_tol", c.solver.rel_tol},
                   {"max_iter", c.solver.max_iter},
                   {"damping", c.solver.damping},
                   {"load_steps", c.solver.load_steps ? json(*c.solver.load_steps) : json(nullptr)},
                   {"corrector_damping",
                    c.solver.corrector_damping ? json(*c.solver.corrector_damping) : json(nullptr)}};
  doc["output"] = c.output;
  doc["threads"] = c.threads;
  return doc;
}

void apply_assignment(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set", "expected key=value, got \"" + assignment + "\"");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  if (!doc.is_object()) throw ConfigError("<root>", "expected an object");
  json* node = &doc;
  std::string path;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty key component");
    path = join(path, part);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    json& next = (*node)[part];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw ConfigError(path, "not an object");
    node = &next;
    start = dot + 1;
  }
}

json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace topoforge
