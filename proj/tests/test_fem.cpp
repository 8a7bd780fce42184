#include <cmath>
#include <memory>

#include "doctest.h"
#include "generators.hpp"
#include "topoforge/fem.hpp"
#include "topoforge/mesh.hpp"
#include "topoforge/problem.hpp"

using namespace topoforge;

namespace {

const double pi = std::acos(-1.0);

std::shared_ptr<const Mesh> unit_square(double h) {
  const auto g = DomainGeometry::rectangle(make_point(0, 0), make_point(1, 1),
                                           [](Point) { return BoundaryMarker::dirichlet; });
  return std::make_shared<Mesh>(triangulate_domain(g, h));
}

// -div grad u = f on the unit square, u = sin(pi x) sin(pi y).
ProblemSpec poisson() {
  ProblemSpec spec;
  spec.name = "poisson";
  Material m;
  m.A1 = [](Point, const auto& y1, const auto&) {
    using T = scalar_of<decltype(y1)>;
    return make_vec<T>(T(0.0), T(0.0));
  };
  m.A2 = [](Point, const auto&, const auto& y2) { return y2; };
  m.F1 = [](Point x) { return make_point(2 * pi * pi * std::sin(pi * x[0]) * std::sin(pi * x[1]), 0.0); };
  spec.inside = m;
  spec.outside = m;
  spec.geometry = DomainGeometry::rectangle(make_point(0, 0), make_point(1, 1),
                                            [](Point) { return BoundaryMarker::dirichlet; });
  return spec;
}

double l2_error(const FieldFunction& u) {
  const Mesh& mesh = u.mesh();
  double sum = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    for (const auto& q : triangle_rule()) {
      Point x{};
      for (int k = 0; k < 3; ++k) x = x + q.lambda[static_cast<std::size_t>(k)] * mesh.vertices[static_cast<std::size_t>(tri[static_cast<std::size_t>(k)])];
      const double e = u.value(t, q.lambda)[0] - std::sin(pi * x[0]) * std::sin(pi * x[1]);
      sum += q.weight * mesh.area(t) * e * e;
    }
  }
  return std::sqrt(sum);
}

Eigen::VectorXd residual_of(const ProblemSpec& spec, const FieldFunction& u) {
  return assemble_residual(StateForm(spec, u.mesh().regions), u, AssemblyContext(u.mesh()));
}

double free_norm(const Eigen::VectorXd& v, const FieldFunction& u) {
  double s = 0.0;
  for (int i = 0; i < u.num_dofs(); ++i)
    if (!u.constrained()[static_cast<std::size_t>(i)]) s += v[i] * v[i];
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("P1 Poisson converges at second order in L2") {
  const ProblemSpec spec = poisson();
  std::vector<double> hs{0.1, 0.05, 0.025}, err;
  for (double h : hs) {
    const auto mesh = unit_square(h);
    NewtonReport report;
    const FieldFunction u = solve_state(spec, mesh, NewtonOptions{}, &report);
    CHECK(report.iterations <= 1);
    err.push_back(l2_error(u));
  }
  const double slope = std::log(err[0] / err[2]) / std::log(hs[0] / hs[2]);
  CAPTURE(err[0]);
  CAPTURE(err[2]);
  CHECK(slope >= 1.9);
}

TEST_CASE("mass matrix rows sum to a third of the vertex patch") {
  ProblemSpec spec;
  Material m;
  m.A1 = [](Point, const auto& y1, const auto&) { return y1; };
  m.A2 = [](Point, const auto&, const auto& y2) {
    using T = scalar_of<decltype(y2.a)>;
    return make_mat<T>(T(0.0), T(0.0), T(0.0), T(0.0));
  };
  spec.inside = m;
  spec.outside = m;
  const auto mesh = unit_square(0.1);
  FieldFunction u(mesh, 1);
  const SparseMatrix M = assemble_jacobian(StateForm(spec, mesh->regions), u, AssemblyContext(*mesh));
  std::vector<double> patch(static_cast<std::size_t>(mesh->num_vertices()), 0.0);
  for (int t = 0; t < mesh->num_triangles(); ++t)
    for (int v : mesh->triangles[static_cast<std::size_t>(t)]) patch[static_cast<std::size_t>(v)] += mesh->area(t) / 3;
  const Eigen::VectorXd rows = M * Eigen::VectorXd::Ones(M.cols());
  for (int v = 0; v < mesh->num_vertices(); ++v) CHECK(rows[v] == doctest::Approx(patch[static_cast<std::size_t>(v)]).epsilon(1e-12));
  CHECK(rows.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Neumann loads touch only Neumann vertices") {
  ProblemSpec spec = build_example("example1", {{"f1", 0.0}, {"f2", 0.0}});
  spec.neumann = [](Point) { return make_point(1.0, 0.0); };
  const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.1));
  FieldFunction u(mesh, 1);  // no constraints: every row is kept
  const Eigen::VectorXd r = residual_of(spec, u);
  std::vector<char> on_neumann(static_cast<std::size_t>(mesh->num_vertices()), 0);
  for (const auto& e : mesh->boundary_edges)
    if (e.marker == BoundaryMarker::neumann)
      for (int v : e.v) on_neumann[static_cast<std::size_t>(v)] = 1;
  for (int v = 0; v < mesh->num_vertices(); ++v)
    if (!on_neumann[static_cast<std::size_t>(v)]) CHECK(r[v] == 0.0);
  // Top and right edges of [-1,1]^2.
  CHECK(r.sum() == doctest::Approx(-4.0).epsilon(1e-12));
}

TEST_CASE("linear Jacobians are state independent, symmetric forms give SPD matrices") {
  const ProblemSpec spec = build_example("example4");
  const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.1));
  FieldFunction u(mesh, 2);
  u.constrain({BoundaryMarker::dirichlet});
  const AssemblyContext ctx(*mesh);
  const StateForm form(spec, mesh->regions);
  const SparseMatrix K0 = assemble_jacobian(form, u, ctx);
  gen::Source src(7);
  for (int i = 0; i < u.num_dofs(); ++i)
    if (!u.constrained()[static_cast<std::size_t>(i)]) u.values()[i] = src.uniform(-1, 1);
  const SparseMatrix K1 = assemble_jacobian(form, u, ctx);
  CHECK((SparseMatrix(K1 - K0)).norm() <= 1e-12 * K0.norm());
  CHECK((SparseMatrix(K0 - SparseMatrix(K0.transpose()))).norm() <= 1e-12 * K0.norm());
  for (int n = 0; n < 20; ++n) {
    Eigen::VectorXd x(u.num_dofs());
    for (int i = 0; i < x.size(); ++i) x[i] = src.uniform(-1, 1);
    CHECK(x.dot(K0 * x) > 0.0);
  }
}

TEST_CASE("unconstrained linear elasticity annihilates rigid motions") {
  const ProblemSpec spec = build_example("example4");
  const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.15));
  FieldFunction u(mesh, 2);
  const SparseMatrix K = assemble_jacobian(StateForm(spec, mesh->regions), u, AssemblyContext(*mesh));
  const int n = mesh->num_vertices();
  Eigen::VectorXd tx = Eigen::VectorXd::Zero(2 * n), ty = tx, rot = tx;
  for (int v = 0; v < n; ++v) {
    const Point x = mesh->vertices[static_cast<std::size_t>(v)];
    tx[2 * v] = 1;
    ty[2 * v + 1] = 1;
    rot[2 * v] = -x[1];
    rot[2 * v + 1] = x[0];
  }
  const double scale = K.norm();
  CHECK((K * tx).norm() <= 1e-10 * scale);
  CHECK((K * ty).norm() <= 1e-10 * scale);
  CHECK((K * rot).norm() <= 1e-10 * scale);
}

TEST_CASE("Example-2 Jacobian matches central differences of the residual") {
  const ProblemSpec spec = build_example("example2");
  const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.1));
  gen::Source src(11);
  FieldFunction u(mesh, 1);
  u.constrain({BoundaryMarker::dirichlet});
  const AssemblyContext ctx(*mesh);
  const StateForm form(spec, mesh->regions);
  for (int trial = 0; trial < 5; ++trial) {
    FieldFunction v = u;
    for (int i = 0; i < u.num_dofs(); ++i) {
      if (u.constrained()[static_cast<std::size_t>(i)]) continue;
      const Point x = mesh->vertices[static_cast<std::size_t>(i)];
      u.values()[i] = src.uniform(-0.5, 0.5) + 0.1 * trial * (x[0] + 1) * (x[1] + 1);
      v.values()[i] = src.uniform(-1, 1);
    }
    const double h = 1e-6;
    FieldFunction plus = u, minus = u;
    plus.values() += h * v.values();
    minus.values() -= h * v.values();
    const Eigen::VectorXd fd = (assemble_residual(form, plus, ctx) - assemble_residual(form, minus, ctx)) / (2 * h);
    const Eigen::VectorXd jv = assemble_jacobian(form, u, ctx) * v.values();
    CHECK(free_norm(fd - jv, u) <= 1e-5 * free_norm(jv, u));
  }
}

TEST_CASE("linear examples need one Newton step and leave a Galerkin residual below 1e-10") {
  for (const std::string name : {"example1", "example4"}) {
    CAPTURE(name);
    const ProblemSpec spec = build_example(name);
    const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.05));
    NewtonReport report;
    const FieldFunction u = solve_state(spec, mesh, NewtonOptions{}, &report);
    CHECK(report.iterations == 1);
    CHECK(free_norm(residual_of(spec, u), u) <= 1e-10);
  }
}

TEST_CASE("Example-2 state converges with a small residual") {
  const ProblemSpec spec = build_example("example2");
  const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.05));
  NewtonReport report;
  const FieldFunction u = solve_state(spec, mesh, NewtonOptions{}, &report);
  CHECK(report.iterations >= 2);
  CHECK(free_norm(residual_of(spec, u), u) <= 1e-10);
  const auto& h = report.history;
  REQUIRE(h.size() >= 3);
  CHECK(h.back() <= 1e-10);
}

TEST_CASE("Example-5 state with load stepping bends downwards") {
  const ProblemSpec spec = build_example("example5");
  const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.1));
  NewtonOptions opt;
  opt.load_steps = spec.load_steps;
  NewtonReport report;
  const FieldFunction u = solve_state(spec, mesh, opt, &report);
  double min_uy = 0.0;
  for (int v = 0; v < mesh->num_vertices(); ++v) min_uy = std::min(min_uy, u.vertex_value(v)[1]);
  CHECK(min_uy < 0.0);
  CHECK(report.residual <= 1e-10);
  const PointValue tip = evaluate_at(u, make_point(2.0, 0.5));
  CHECK(tip.value[1] < 0.0);
}

TEST_CASE("compliance adjoint of linear elasticity is minus the state") {
  const ProblemSpec spec = build_example("example4");
  const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.08));
  const FieldFunction u = solve_state(spec, mesh, NewtonOptions{});
  const FieldFunction p = solve_adjoint(spec, u);
  CHECK((p.values() + u.values()).norm() <= 1e-8 * u.values().norm());
}

TEST_CASE("zero cost gives a zero adjoint") {
  ProblemSpec spec = build_example("example1", {{"alpha_tilde1", 0.0}, {"alpha_tilde2", 0.0}});
  const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.1));
  const FieldFunction u = solve_state(spec, mesh, NewtonOptions{});
  CHECK(solve_adjoint(spec, u).values().norm() == 0.0);
}

TEST_CASE("adjoint solves the transposed linearization") {
  for (const std::string name : {"example1", "example2"}) {
    CAPTURE(name);
    const ProblemSpec spec = build_example(name);
    const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.1));
    const FieldFunction u = solve_state(spec, mesh, NewtonOptions{});
    const FieldFunction p = solve_adjoint(spec, u);
    const SparseMatrix J = assemble_jacobian(spec, u);
    const Eigen::VectorXd g = cost_gradient(spec, u, mesh->regions);
    const Eigen::VectorXd lhs = SparseMatrix(J.transpose()) * p.values() + g;
    CHECK(free_norm(lhs, u) <= 1e-9 * std::max(1.0, g.norm()));
    // Convection makes the operator nonsymmetric, so p differs from the plain solve.
    if (name == "example1") {
      const Eigen::VectorXd other = J * p.values() + g;
      CHECK(free_norm(other, u) > 1e-6);
    }
  }
}

TEST_CASE("cost gradient matches finite differences of the cost") {
  const ProblemSpec spec = build_example("example2");
  const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.2));
  gen::Source src(3);
  FieldFunction u(mesh, 1);
  for (int i = 0; i < u.num_dofs(); ++i) u.values()[i] = src.uniform(-1, 1);
  const Eigen::VectorXd g = cost_gradient(spec, u, mesh->regions);
  for (int n = 0; n < 10; ++n) {
    const int i = src.integer(0, u.num_dofs() - 1);
    const double h = 1e-6;
    FieldFunction a = u, b = u;
    a.values()[i] += h;
    b.values()[i] -= h;
    const double fd = (evaluate_cost(spec, a) - evaluate_cost(spec, b)) / (2 * h);
    CHECK(fd == doctest::Approx(g[i]).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("point location and interpolation reproduce linear fields") {
  const ProblemSpec spec = build_example("example1");
  const auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.1));
  FieldFunction u(mesh, 1);
  auto linear = [](Point x) { return 0.3 + 2 * x[0] - 0.7 * x[1]; };
  for (int v = 0; v < mesh->num_vertices(); ++v) u.values()[v] = linear(mesh->vertices[static_cast<std::size_t>(v)]);
  const PointLocator locator(*mesh);
  gen::Source src(5);
  for (int n = 0; n < 200; ++n) {
    const Point x = src.point(-1, 1);
    const PointValue pv = evaluate_at(u, x, &locator);
    CHECK(pv.value[0] == doctest::Approx(linear(x)).epsilon(1e-12));
    CHECK(pv.gradient(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(pv.gradient(0, 1) == doctest::Approx(-0.7).epsilon(1e-9));
  }
  const auto other = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.07));
  const FieldFunction w = interpolate(u, other);
  for (int v = 0; v < other->num_vertices(); ++v)
    CHECK(w.values()[v] == doctest::Approx(linear(other->vertices[static_cast<std::size_t>(v)])).epsilon(1e-12));
}
