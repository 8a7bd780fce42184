// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fd_check.hpp"
#include "generators.hpp"
#include "topoforge/corrector.hpp"
#include "topoforge/fieldeval.hpp"
#include "topoforge/taylor.hpp"
#include "topoforge/tdcore.hpp"

using namespace topoforge;

namespace {

const double pi = std::acos(-1.0);

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

int failures = 0;

void criterion(int n, const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto start = Clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail << "[exception: " << e.what() << "] ";
  }
  if (!out.pass) ++failures;
  std::printf("criterion %d: %s  %s(%.0f s)\n", n, out.pass ? "PASS" : "FAIL", out.detail.str().c_str(),
              seconds_since(start));
  std::fflush(stdout);
}

int worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

ClosedFormInputs closed_form_inputs(const FrozenPointData& f, const AdjointPointData& a) {
  return {f.u0z[0], make_point(f.Du0z(0, 0), f.Du0z(0, 1)), a.p0z[0], make_point(a.Dp0z(0, 0), a.Dp0z(0, 1))};
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Example-1 design solution at the default point and the TD per shape.
struct PointStudy {
  ProblemSpec spec = build_example("example1");
  TDOptions options;
  UnperturbedSolution solution;
  std::map<std::string, TDReport> reports;
  std::map<std::string, BallMesh> balls;
};

struct TaylorStudy {
  TaylorReference reference;
  TaylorResult result;
};

TaylorStudy taylor_study(const ProblemSpec& spec, const std::string& shape) {
  const EpsilonSweep sweep;
  TaylorOptions options;
  options.threads = worker_threads();
  const PerturbationFactory factory = make_factory(spec, spec.default_z, InclusionShape::named(shape), sweep, options);
  TaylorStudy s;
  s.reference = taylor_reference(spec, factory, sweep, options);
  s.result = run_taylor_test(spec, factory, s.reference.solution, s.reference.td.total, sweep, options);
  return s;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// -div grad u = f on the unit square with u = sin(pi x) sin(pi y).
double poisson_l2_slope() {
  ProblemSpec spec;
  Material m;
  m.A1 = [](Point, const auto& y1, const auto&) {
    using T = scalar_of<decltype(y1)>;
    return make_vec<T>(T(0.0), T(0.0));
  };
  m.A2 = [](Point, const auto&, const auto& y2) { return y2; };
  m.F1 = [](Point x) { return make_point(2 * pi * pi * std::sin(pi * x[0]) * std::sin(pi * x[1]), 0.0); };
  spec.inside = spec.outside = m;
  spec.geometry = DomainGeometry::rectangle(make_point(0, 0), make_point(1, 1),
                                            [](Point) { return BoundaryMarker::dirichlet; });
  std::vector<double> err;
  for (double h : {0.1, 0.025}) {
    const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, h));
    const FieldFunction u = solve_state(spec, mesh, NewtonOptions{});
    double sum = 0.0;
    for (int t = 0; t < mesh->num_triangles(); ++t) {
      const auto& tri = mesh->triangles[static_cast<std::size_t>(t)];
      for (const auto& q : triangle_rule()) {
        Point x{};
        for (std::size_t k = 0; k < 3; ++k) x = x + q.lambda[k] * mesh->vertices[static_cast<std::size_t>(tri[k])];
        const double e = u.value(t, q.lambda)[0] - std::sin(pi * x[0]) * std::sin(pi * x[1]);
        sum += q.weight * mesh->area(t) * e * e;
      }
    }
    err.push_back(std::sqrt(sum));
  }
  return std::log(err[0] / err[1]) / std::log(4.0);
}

}  // namespace

int main() {
  PointStudy point;
  std::map<std::string, TaylorStudy> ex1_taylor;
  const auto& shapes2d = InclusionShape::catalog_names();

  criterion(1, [&](Outcome& out) {
    const auto start = Clock::now();
    const ProblemSpec& spec = point.spec;
    const Point z = spec.default_z;
    auto mesh = std::make_shared<Mesh>(triangulate_domain(
        spec.geometry, point.options.h_coarse, RefineSpec{z, point.options.h_fine, point.options.refine_radius}));
    point.solution = solve_unperturbed(spec, mesh, NewtonOptions{});
    out.detail << "D-mesh " << mesh->num_vertices() << " vertices; ";
    for (const auto& name : shapes2d) {
      const InclusionShape shape = InclusionShape::named(name);
      point.balls[name] = make_ball(shape, point.options.local);
      point.reports[name] = topological_derivative(spec, point.solution, z, shape, point.balls[name], point.options);
    }
    const TDReport& disk = point.reports.at("disk");
    const double closed = example1_closed_form(spec, closed_form_inputs(disk.frozen, disk.adjoint));
    const double e_disk = rel(disk.total, closed);
    const double e_shifted = rel(point.reports.at("shifted_disk").total, closed);
    out.detail << "ball " << disk.ball_vertices << " vertices, R " << disk.R << "; closed form " << fmt(closed, 6)
               << ", disk " << fmt(disk.total, 6) << " (rel " << fmt(e_disk, 2) << "), shifted_disk "
               << fmt(point.reports.at("shifted_disk").total, 6) << " (rel " << fmt(e_shifted, 2) << "); others";
    for (const char* name : {"ellipse", "shifted_ellipse", "lshape"})
      out.detail << ' ' << name << ' ' << fmt(point.reports.at(name).total, 6);
    out.detail << "; ";
    out.require(e_disk <= 0.05, "disk within 5%");
    out.require(e_shifted <= 0.05, "shifted disk within 5%");
    const double t = seconds_since(start);
    out.detail << "runtime " << fmt(t, 3) << " s; ";
    out.require(t < 120.0, "runtime under 2 min");
  });

  criterion(2, [&](Outcome& out) {
    const auto start = Clock::now();
    const std::map<std::string, double> ex1_min{
        {"disk", 3.5}, {"shifted_disk", 2.8}, {"ellipse", 3.5}, {"shifted_ellipse", 2.8}, {"lshape", 2.8}};
    out.detail << "example1:";
    for (const auto& name : shapes2d) {
      ex1_taylor[name] = taylor_study(point.spec, name);
      const double slope = ex1_taylor[name].result.slope;
      out.detail << ' ' << name << ' ' << fmt(slope, 3);
      out.require(slope >= ex1_min.at(name), "example1 " + name + " slope >= " + fmt(ex1_min.at(name), 2));
    }
    out.detail << "; example2:";
    const ProblemSpec ex2 = build_example("example2");
    for (const auto& name : shapes2d) {
      const double slope = taylor_study(ex2, name).result.slope;
      out.detail << ' ' << name << ' ' << fmt(slope, 3);
      out.require(slope >= 2.8, "example2 " + name + " slope >= 2.8");
    }
    const double t = seconds_since(start);
    out.detail << "; runtime " << fmt(t / 60, 3) << " min; ";
    out.require(t < 1800.0, "runtime under 30 min");
  });

  criterion(3, [&](Outcome& out) {
    for (const std::string example : {"example4", "example5"}) {
      const ProblemSpec spec = build_example(example);
      out.detail << example << " (load steps " << spec.load_steps << ", corrector damping " << spec.corrector_damping
                 << "):";
      for (const std::string name : {"disk", "shifted_disk", "ellipse", "shifted_ellipse"}) {
        const double slope = taylor_study(spec, name).result.slope;
        out.detail << ' ' << name << ' ' << fmt(slope, 3);
        out.require(slope >= 2.8, example + " " + name + " slope >= 2.8");
      }
      out.detail << "; ";
    }
  });

  criterion(4, [&](Outcome& out) {
    const TDReport& disk = point.reports.at("disk");
    const CorrectorBundle b = solve_corrector(point.spec, disk.frozen, point.balls.at("disk").mesh);
    Mat2<double> mean{};
    double area = 0.0;
    const Mesh& ball = *b.ball;
    for (int t = 0; t < ball.num_triangles(); ++t) {
      if (ball.regions[static_cast<std::size_t>(t)] != Region::inside) continue;
      mean += ball.area(t) * b.K.gradient(t);
      area += ball.area(t);
    }
    mean = (1.0 / area) * mean;
    const auto& p = point.spec.parameters;
    const double b1 = p.at("beta1"), b2 = p.at("beta2");
    const Mat2<double> expected = (-(b1 - b2) / (b1 + b2)) * disk.frozen.Du0z;
    const double err = frobenius_norm(mean - expected) / frobenius_norm(expected);
    out.detail << "mean DK (" << fmt(mean(0, 0), 6) << ", " << fmt(mean(0, 1), 6) << ") vs (" << fmt(expected(0, 0), 6)
               << ", " << fmt(expected(0, 1), 6) << "), rel " << fmt(err, 2) << "; ";
    out.require(err <= 0.02, "within 2%");
  });

  criterion(5, [&](Outcome& out) {
    const ProblemSpec& spec = point.spec;
    const InclusionShape disk = InclusionShape::named("disk");
    const BallMesh& ball = point.balls.at("disk");
    const CorrectorBasis basis = precompute_basis(spec, disk, ball, worker_threads());
    const FrozenPointData& frozen = point.reports.at("disk").frozen;
    const Eigen::VectorXd direct = solve_corrector(spec, frozen, ball.mesh).K.values();
    const double k_err = (superpose(basis, frozen.Du0z).values() - direct).norm() / direct.norm();
    out.detail << "K superposed vs direct rel " << fmt(k_err, 2) << "; K_hat norm " << basis.K_hat.values().norm()
               << "; ";
    out.require(k_err <= 1e-8, "superposed K within 1e-8");
    out.require(basis.K_hat.values().norm() == 0.0, "K_hat = 0");

    const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.05));
    const UnperturbedSolution sol = solve_unperturbed(spec, mesh, NewtonOptions{});
    const TDFieldMap map = td_field(spec, basis, sol, FieldOptions{worker_threads()});
    gen::Source src(2024);
    double worst = 0.0;
    for (int n = 0; n < 10;) {
      const auto t = static_cast<std::size_t>(src.integer(0, mesh->num_triangles() - 1));
      if (map.flagged[t]) continue;
      ++n;
      const TDReport r = topological_derivative(spec, sol, map.centroids[t], disk, ball, point.options);
      worst = std::max(worst, std::abs(map.total[t] - r.total) / std::abs(r.total));
    }
    out.detail << "td_field vs pointwise worst rel " << fmt(worst, 2) << " at 10 centroids; linear solves in field loop "
               << map.linear_solves << "; ";
    out.require(worst <= 1e-6, "centroid agreement within 1e-6");
  });

  criterion(6, [&](Outcome& out) {
    ProblemSpec spec = build_example("example1");
    spec.geometry.subdomains.clear();
    const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.05));
    const UnperturbedSolution sol = solve_unperturbed(spec, mesh, NewtonOptions{});
    const InclusionShape disk = InclusionShape::named("disk");
    const CorrectorBasis basis = precompute_basis(spec, disk, make_ball(disk, {}), worker_threads());
    const TDFieldMap map = td_field(spec, basis, sol, FieldOptions{worker_threads()});
    const std::vector<double> ref = example1_closed_form_field(spec, sol);
    double max_diff = 0.0, max_ref = 0.0;
    int cells = 0;
    for (std::size_t t = 0; t < ref.size(); ++t) {
      if (spec.geometry.distance_to_boundary(map.centroids[t]) < 0.1) continue;
      ++cells;
      max_diff = std::max(max_diff, std::abs(map.total[t] - ref[t]));
      max_ref = std::max(max_ref, std::abs(ref[t]));
    }
    const double dev = max_diff / max_ref;
    out.detail << mesh->num_vertices() << " vertices, " << cells << " interior cells; max |diff| " << fmt(max_diff, 3)
               << ", max |closed form| " << fmt(max_ref, 3) << ", deviation " << fmt(dev, 2) << "; ";
    out.require(map.flagged_count() == 0, "no flagged cells");
    out.require(dev <= 0.05, "deviation within 5%");
  });

  criterion(7, [&](Outcome& out) {
    gen::Source src(7);
    double ad_worst = 0.0;
    for (const auto& name : example_names()) {
      const ProblemSpec spec = build_example(name);
      const int m = spec.components;
      const double scale = m == 2 ? 0.5 : 2.0;
      for (const Material* mat : {&spec.inside, &spec.outside}) {
        ad_worst = std::max(ad_worst, fdcheck::worst_fd_mismatch(mat->A1, m, src, scale));
        ad_worst = std::max(ad_worst, fdcheck::worst_fd_mismatch(mat->A2, m, src, scale));
        if (mat->j) ad_worst = std::max(ad_worst, fdcheck::worst_fd_mismatch(mat->j, m, src, scale));
      }
      if (spec.j_boundary) ad_worst = std::max(ad_worst, fdcheck::worst_fd_mismatch(spec.j_boundary, m, src, scale));
    }
    out.detail << "AD vs FD " << fmt(ad_worst, 2) << "; ";
    out.require(ad_worst <= 1e-6, "AD vs FD <= 1e-6");

    const double l2 = poisson_l2_slope();
    out.detail << "P1 L2 slope " << fmt(l2, 3) << "; ";
    out.require(l2 >= 1.9, "P1 L2 slope >= 1.9");

    {
      const ProblemSpec spec = build_example("example4");
      const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.1));
      const FieldFunction u(mesh, 2);
      const SparseMatrix K = assemble_jacobian(StateForm(spec, mesh->regions), u, AssemblyContext(*mesh));
      double worst = 0.0;
      for (int mode = 0; mode < 3; ++mode) {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(u.num_dofs());
        for (int v = 0; v < mesh->num_vertices(); ++v) {
          const Point x = mesh->vertices[static_cast<std::size_t>(v)];
          r[2 * v] = mode == 0 ? 1.0 : mode == 1 ? 0.0 : -x[1];
          r[2 * v + 1] = mode == 0 ? 0.0 : mode == 1 ? 1.0 : x[0];
        }
        worst = std::max(worst, (K * r).norm() / (K.norm() * r.norm()));
      }
      out.detail << "rigid-body residual " << fmt(worst, 2) << "; ";
      out.require(worst <= 1e-12, "rigid motions in the kernel");
    }

    double r1_worst = 0.0;
    for (const auto& [name, r] : point.reports)
      r1_worst = std::max(r1_worst, std::abs(r.R1) / (std::abs(r.R2) + std::abs(r.dL)));
    out.detail << "affine R1/scale " << fmt(r1_worst, 2) << "; ";
    out.require(r1_worst <= 1e-10, "R1 = 0 for the affine spec");

    {
      const ProblemSpec same = build_example(
          "example1", {{"beta1", 2.0}, {"alpha1", 2.0}, {"alpha_tilde1", 2.0}, {"b1x", 0.0}, {"b1y", 1.0}, {"f1", 2.0}});
      const UnperturbedSolution sol = solve_unperturbed(same, point.solution.mesh, NewtonOptions{});
      const TDReport r = topological_derivative(same, sol, same.default_z, InclusionShape::named("disk"),
                                                point.balls.at("disk"), point.options);
      out.detail << "zero-contrast TD " << fmt(r.total, 2) << "; ";
      out.require(r.total == 0.0, "zero contrast gives TD = 0");
    }

    {
      const InclusionShape ellipse = InclusionShape::named("ellipse");
      const TDReport one = point.reports.at("ellipse");
      const TDReport two = topological_derivative(point.spec, point.solution, point.spec.default_z, ellipse.scaled(2.0),
                                                  make_ball(ellipse.scaled(2.0), {}), point.options);
      const double e = rel(two.total, one.total);
      out.detail << "scaling 2w rel " << fmt(e, 2) << "; ";
      out.require(e <= 0.01, "shape scaling within 1%");
    }

    {
      LocalMeshOptions big;
      big.ball_radius = 2000.0;
      const InclusionShape disk = InclusionShape::named("disk");
      const TDReport r2000 =
          topological_derivative(point.spec, point.solution, point.spec.default_z, disk, make_ball(disk, big), point.options);
      const double e = rel(r2000.total, point.reports.at("disk").total);
      out.detail << "R doubling rel " << fmt(e, 2) << "; ";
      out.require(e <= 0.01, "R doubling within 1%");
    }

    double wrong_max = 0.0;
    for (const auto& [name, s] : ex1_taylor)
      for (double f : {0.8, 1.2}) wrong_max = std::max(wrong_max, with_td(s.result, f * s.result.td_total).slope);
    out.detail << "wrong-TD max slope " << fmt(wrong_max, 3) << "; ";
    out.require(ex1_taylor.size() == shapes2d.size(), "Taylor results available");
    out.require(wrong_max <= 2.3, "wrong TD drops the slope to <= 2.3");
  });

  criterion(8, [&](Outcome& out) {
    const TDReport& r = point.reports.at("disk");
    const auto& p = point.spec.parameters;
    const double b1 = p.at("beta1"), b2 = p.at("beta2");
    const Point db = make_point(p.at("b1x") - p.at("b2x"), p.at("b1y") - p.at("b2y"));
    const double u = r.frozen.u0z[0], pz = r.adjoint.p0z[0];
    const double conv = db[0] * r.frozen.Du0z(0, 0) + db[1] * r.frozen.Du0z(0, 1);
    const double assembled =
        r.r2.a1 + r.dl.a1 - (p.at("alpha1") - p.at("alpha2")) * u * pz + (p.at("f1") - p.at("f2")) * pz;
    const double expected = 2 * b2 / (b1 + b2) * conv * pz;
    const double e = rel(assembled, expected);
    out.detail << "convection term " << fmt(assembled, 6) << " vs " << fmt(expected, 6) << " (rel " << fmt(e, 2)
               << "); without R2^A1 slopes:";
    out.require(e <= 0.02, "convection coefficient within 2%");
    for (const std::string name : {"shifted_disk", "shifted_ellipse", "lshape"}) {
      const auto it = ex1_taylor.find(name);
      if (it == ex1_taylor.end()) {
        out.require(false, "Taylor result for " + name);
        continue;
      }
      const TaylorStudy& s = it->second;
      const double slope = with_td(s.result, s.result.td_total - s.reference.td.r2.a1).slope;
      out.detail << ' ' << name << ' ' << fmt(slope, 3);
      out.require(slope < 2.8, "dropping R2^A1 breaks the " + name + " slope");
    }
    out.detail << "; ";
  });

  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
