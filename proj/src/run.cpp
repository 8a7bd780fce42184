#include "topoforge/run.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <thread>

#include "topoforge/csv.hpp"
#include "topoforge/error.hpp"
#include "topoforge/fieldeval.hpp"
#include "topoforge/linear_solver.hpp"
#include "topoforge/taylor.hpp"
#include "topoforge/tdcore.hpp"

namespace topoforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* tool_version = "0.1.0";
constexpr const char* quadrature_signature =
    "triangle:dunavant6-degree4;edge:gauss3;corrector:centroid;remainder:gauss-legendre5";

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Output directory, artifacts written so far, timings.
class Session {
 public:
  Session(const RunConfig& config, std::ostream& log) : config_(config), log_(log) {
    dir_ = resolve_output_dir(config.output);
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw IoError("cannot create output directory " + dir_.string());
  }

  void artifact(const std::string& name, const std::function<void(std::ostream&)>& write) {
    std::ostringstream buf;
    write(buf);
    const std::string bytes = buf.str();
    std::ofstream out(dir_ / name, std::ios::binary);
    out << bytes;
    out.close();
    if (!out) throw IoError("cannot write " + (dir_ / name).string());
    names_.push_back(name);
    hashes_[name] = hex(fnv1a(bytes));
    log_ << "wrote " << (dir_ / name).string() << '\n';
  }

  template <class F>
  auto timed(const std::string& stage, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&] {
      timings_[stage] = timings_.value(stage, 0.0) +
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto r = f();
      finish();
      return r;
    }
  }

  void write_manifest(const ProblemSpec* spec, const RunResult& result) {
    json m;
    m["tool"] = "topoforge";
    m["version"] = tool_version;
    m["command"] = to_string(config_.command);
    m["config"] = to_json(config_);
    m["output_dir"] = dir_.string();
    json inputs = m["config"];
    inputs.erase("output");
    inputs.erase("threads");
    std::string signature = inputs.dump() + quadrature_signature;
    if (spec) {
      m["inputs"]["geometry"] = spec->geometry.description();
      m["inputs"]["parameters"] = spec->parameters;
      signature += spec->geometry.description() + json(spec->parameters).dump();
    }
    m["inputs"]["quadrature"] = quadrature_signature;
    m["hashes"]["inputs"] = hex(fnv1a(signature));
    m["hashes"]["artifacts"] = hashes_;
    m["timings_seconds"] = timings_;
    m["threads"] = config_.threads;
    m["linear_solves"] = linear_solve_count();
    m["exit_code"] = result.exit_code;
    if (!result.message.empty()) {
      m["error"]["message"] = result.message;
      m["error"]["stage"] = result.stage;
    }
    artifact("manifest.json", [&](std::ostream& os) { os << m.dump(2) << '\n'; });
  }

  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& artifacts() const { return names_; }
  std::ostream& log() { return log_; }

 private:
  const RunConfig& config_;
  std::ostream& log_;
  fs::path dir_;
  std::vector<std::string> names_;
  json hashes_ = json::object();
  json timings_ = json::object();
};

ProblemSpec make_spec(const RunConfig& c) {
  ProblemSpec spec = build_example(c.example, c.overrides);
  if (c.empty_omega()) spec.geometry.subdomains.clear();
  return spec;
}

NewtonOptions newton_options(const RunConfig& c, const ProblemSpec& spec) {
  NewtonOptions n;
  n.tol = c.solver.tol;
  n.rel_tol = c.solver.rel_tol;
  n.max_iter = c.solver.max_iter;
  n.damping = c.solver.damping;
  n.load_steps = c.solver.load_steps.value_or(spec.load_steps);
  return n;
}

LocalMeshOptions local_options(const RunConfig& c) {
  LocalMeshOptions l;
  l.h_inclusion = c.mesh.h_inclusion;
  l.grading = c.mesh.grading;
  l.ball_radius = c.mesh.R;
  l.delta = c.sweep.delta;
  l.rings_per_delta = c.mesh.rings_per_delta;
  return l;
}

TDOptions td_options(const RunConfig& c, const ProblemSpec& spec) {
  TDOptions o;
  o.local = local_options(c);
  o.corrector.damping = c.solver.corrector_damping.value_or(spec.corrector_damping);
  o.corrector.tol = c.solver.tol;
  o.corrector.rel_tol = c.solver.rel_tol;
  o.corrector.max_iter = c.solver.max_iter;
  o.corrector_damping_from_spec = false;
  o.h_coarse = c.mesh.h_coarse;
  o.h_fine = c.mesh.h_fine;
  o.refine_radius = c.mesh.refine_radius;
  o.state = newton_options(c, spec);
  o.load_steps_from_spec = false;
  return o;
}

std::vector<InclusionShape> shapes_of(const RunConfig& c, const ProblemSpec& spec) {
  std::vector<InclusionShape> out;
  for (const auto& name : c.shapes.empty() ? spec.default_shapes : c.shapes)
    out.push_back(InclusionShape::named(name, c.mesh.ellipse_axes));
  return out;
}

template <class Job>
void parallel_for(int n, int threads, const Job& job) {
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  auto worker = [&] {
    for (int k = next++; k < n; k = next++) {
      try {
        job(k);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 1; i < std::min(threads, n); ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

VtkField point_field(const std::string& name, const FieldFunction& f) {
  return {name, f.components(), std::vector<double>(f.values().data(), f.values().data() + f.values().size())};
}

void run_solve(Session& s, const RunConfig& c, const ProblemSpec& spec) {
  const Point z = c.z.value_or(spec.default_z);
  auto mesh = s.timed("mesh", [&] {
    return std::make_shared<Mesh>(
        triangulate_domain(spec.geometry, c.mesh.h_coarse, RefineSpec{z, c.mesh.h_fine, c.mesh.refine_radius}));
  });
  NewtonReport report;
  const FieldFunction u0 = s.timed("state", [&] { return solve_state(spec, mesh, newton_options(c, spec), &report); });
  const FieldFunction p0 = s.timed("adjoint", [&] { return solve_adjoint(spec, u0); });
  const double J = evaluate_cost(spec, u0);
  s.artifact("state.vtk", [&](std::ostream& os) { write_vtk(os, *mesh, {}, {point_field("u", u0)}); });
  s.artifact("adjoint.vtk", [&](std::ostream& os) { write_vtk(os, *mesh, {}, {point_field("p", p0)}); });
  s.artifact("solve.csv", [&](std::ostream& os) {
    CsvWriter csv(os);
    csv.header({"example", "vertices", "triangles", "J", "newton_iterations", "residual"});
    csv.cell(spec.name).cell(mesh->num_vertices()).cell(mesh->num_triangles()).cell(J);
    csv.cell(report.iterations).cell(report.residual);
    csv.end_row();
  });
}

void run_td_point(Session& s, const RunConfig& c, const ProblemSpec& spec) {
  const Point z = c.z.value_or(spec.default_z);
  const TDOptions opts = td_options(c, spec);
  auto mesh = s.timed("mesh", [&] {
    return std::make_shared<Mesh>(triangulate_domain(spec.geometry, c.mesh.h_coarse,
                                                     RefineSpec{z, c.mesh.h_fine, c.mesh.refine_radius}));
  });
  const UnperturbedSolution solution =
      s.timed("state+adjoint", [&] { return solve_unperturbed(spec, mesh, opts.state); });
  const auto shapes = shapes_of(c, spec);
  std::vector<TDReport> reports(shapes.size());
  s.timed("td", [&] {
    parallel_for(static_cast<int>(shapes.size()), c.threads, [&](int k) {
      const auto& shape = shapes[static_cast<std::size_t>(k)];
      reports[static_cast<std::size_t>(k)] =
          topological_derivative(spec, solution, z, shape, make_ball(shape, opts.local), opts);
    });
  });
  s.artifact("td_point.csv", [&](std::ostream& os) {
    CsvWriter csv(os);
    csv.header({"shape", "z_x", "z_y", "total", "R1", "R2", "dL", "R1_A1", "R1_A2", "R1_j", "R2_A1", "R2_A2",
                "R2_j", "dL_A1", "dL_A2", "dL_j", "omega_area", "omega_area_exact", "R", "h_inclusion",
                "ball_vertices", "design_vertices", "corrector_iterations", "corrector_residual"});
    for (const auto& r : reports) {
      csv.cell(r.shape).cell(r.z[0]).cell(r.z[1]).cell(r.total).cell(r.R1).cell(r.R2).cell(r.dL);
      for (const TermSplit* t : {&r.r1, &r.r2, &r.dl}) csv.cell(t->a1).cell(t->a2).cell(t->j);
      csv.cell(r.omega_area).cell(r.omega_area_exact).cell(r.R).cell(r.h_inclusion);
      csv.cell(r.ball_vertices).cell(r.design_vertices).cell(r.corrector_iterations).cell(r.corrector_residual);
      csv.end_row();
    }
  });
}

void run_taylor(Session& s, const RunConfig& c, const ProblemSpec& spec) {
  const Point z = c.z.value_or(spec.default_z);
  const EpsilonSweep sweep{c.sweep.eps0, c.sweep.delta, c.sweep.count};
  TaylorOptions opts;
  opts.local = local_options(c);
  opts.outer.h_coarse = c.mesh.h_coarse;
  opts.newton = newton_options(c, spec);
  opts.newton.load_steps = 1;
  opts.reference = newton_options(c, spec);
  opts.load_steps_from_spec = false;
  opts.noise_floor = c.sweep.noise_floor;
  opts.threads = c.threads;
  const TDOptions td = td_options(c, spec);

  std::vector<TaylorResult> results;
  for (const auto& shape : shapes_of(c, spec)) {
    const PerturbationFactory factory = s.timed("mesh", [&] { return make_factory(spec, z, shape, sweep, opts); });
    const TaylorReference ref = s.timed("reference", [&] { return taylor_reference(spec, factory, sweep, opts, td); });
    TaylorResult result = s.timed("sweep", [&] {
      return run_taylor_test(spec, factory, ref.solution, ref.td.total, sweep, opts);
    });
    s.log() << shape.id() << ": td " << format_number(result.td_total) << ", slope " << format_number(result.slope)
            << '\n';
    s.artifact("taylor_" + shape.id() + ".csv", [&](std::ostream& os) { write_taylor_csv(os, result); });
    results.push_back(std::move(result));
  }
  s.artifact("taylor_summary.csv", [&](std::ostream& os) {
    CsvWriter csv(os);
    csv.header({"shape", "td_total", "slope", "rows_in_fit", "rows_failed"});
    for (const auto& r : results) {
      int in = 0, failed = 0;
      for (const auto& row : r.rows) {
        in += row.included;
        failed += row.status.rfind("failed", 0) == 0;
      }
      csv.cell(r.shape).cell(r.td_total).cell(r.slope).cell(in).cell(failed);
      csv.end_row();
    }
  });
  s.artifact("taylor_normalized.dat", [&](std::ostream& os) { write_plot_table(os, normalize_for_plot(results)); });
}

void run_td_field(Session& s, const RunConfig& c, const ProblemSpec& spec) {
  auto mesh = s.timed("mesh", [&] { return std::make_shared<Mesh>(triangulate_domain(spec.geometry, c.mesh.h_coarse)); });
  const UnperturbedSolution solution =
      s.timed("state+adjoint", [&] { return solve_unperturbed(spec, mesh, newton_options(c, spec)); });
  const LocalMeshOptions local = local_options(c);
  for (const auto& shape : shapes_of(c, spec)) {
    const CorrectorBasis basis = s.timed("basis", [&] {
      return precompute_basis(spec, shape, make_ball(shape, local), c.threads);
    });
    const TDFieldMap map = s.timed("field", [&] { return td_field(spec, basis, solution, FieldOptions{c.threads}); });
    // The disk formula is known in closed form for the first example.
    std::vector<double> reference;
    const bool with_reference = spec.name == "example1" && shape.kind() == InclusionShape::Kind::disk &&
                                norm(shape.center()) == 0.0 && spec.geometry.subdomains.empty();
    if (with_reference) reference = example1_closed_form_field(spec, solution);
    const std::vector<double>* ref = with_reference ? &reference : nullptr;
    s.artifact("td_field_" + shape.id() + ".vtk", [&](std::ostream& os) { write_field_vtk(os, map, ref); });
    s.artifact("td_field_" + shape.id() + ".csv", [&](std::ostream& os) { write_field_csv(os, map, ref); });
    s.log() << shape.id() << ": " << map.total.size() << " cells, " << map.flagged_count() << " flagged\n";
  }
}

void dispatch(Session& s, const RunConfig& c, const ProblemSpec& spec) {
  switch (c.command) {
    case Command::solve: run_solve(s, c, spec); break;
    case Command::td_point: run_td_point(s, c, spec); break;
    case Command::taylor: run_taylor(s, c, spec); break;
    case Command::td_field: run_td_field(s, c, spec); break;
  }
}

// Cheap checks that need the assembled problem; run before any solve.
void precheck(const RunConfig& c, const ProblemSpec& spec) {
  if (c.command != Command::td_field) return;
  try {
    check_superposition_premise(spec);
  } catch (const LinearityError& e) {
    throw ConfigError("example", c.example + " is not eligible for td-field (" + e.what() + ")");
  }
}

}  // namespace

std::string resolve_output_dir(const std::string& configured) {
  const char* env = std::getenv("TOPOFORGE_OUTPUT");
  return env && *env ? std::string(env) : configured;
}

RunResult execute(const RunConfig& config, std::ostream& log) {
  const ProblemSpec spec = make_spec(config);
  precheck(config, spec);
  Session session(config, log);
  dispatch(session, config, spec);
  RunResult result;
  result.output_dir = session.dir().string();
  session.write_manifest(&spec, result);
  result.artifacts = session.artifacts();
  return result;
}

RunResult run(Command command, const std::string& config_path, const std::vector<std::string>& assignments,
              std::optional<int> threads, std::ostream& log) {
  RunResult result;
  std::optional<RunConfig> config;
  std::optional<ProblemSpec> spec;
  std::optional<Session> session;
  auto fail = [&](int code, const std::string& stage, const std::string& message) {
    result.exit_code = code;
    result.stage = stage;
    result.message = message;
    log << "error";
    if (!stage.empty()) log << " [" << stage << "]";
    log << ": " << message << '\n';
  };
  try {
    json doc = read_config_file(config_path);
    for (const auto& a : assignments) apply_assignment(doc, a);
    if (threads) doc["threads"] = *threads;
    config = parse_config(doc, command);
    spec = make_spec(*config);
    precheck(*config, *spec);
    session.emplace(*config, log);
    dispatch(*session, *config, *spec);
  } catch (const ConfigError& e) {
    fail(exit_config, e.path(), e.what());
  } catch (const IoError& e) {
    fail(exit_io, "io", e.what());
  } catch (const SolverError& e) {
    fail(exit_solver, e.stage(), e.what());
  } catch (const MeshError& e) {
    fail(exit_solver, "mesh", e.what());
  } catch (const EvaluationError& e) {
    fail(exit_solver, "evaluation", e.what());
  } catch (const std::invalid_argument& e) {
    fail(exit_config, "input", e.what());
  } catch (const std::exception& e) {
    fail(exit_internal, "internal", e.what());
  }
  if (session) {
    result.output_dir = session->dir().string();
    try {
      session->write_manifest(spec ? &*spec : nullptr, result);
    } catch (const IoError& e) {
      if (result.exit_code == exit_ok) fail(exit_io, "io", e.what());
    }
    result.artifacts = session->artifacts();
  }
  return result;
}

}  // namespace topoforge
