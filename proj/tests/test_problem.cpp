#include <cmath>

#include "doctest.h"
#include "generators.hpp"
#include "topoforge/fem.hpp"
#include "topoforge/problem.hpp"

using namespace topoforge;

namespace {
const double pi = std::acos(-1.0);
}

TEST_CASE("example1 data") {
  const ProblemSpec s = build_example("example1");
  const auto& p = s.parameters;
  CHECK(s.components == 1);
  CHECK(p.at("alpha_tilde1") == 1);
  CHECK(p.at("alpha_tilde2") == 2);
  CHECK(p.at("beta_tilde1") == 0);
  CHECK(p.at("beta_tilde2") == 0);
  CHECK(p.at("gamma_tilde") == 0);
  CHECK(p.at("b1x") == 1);
  CHECK(p.at("b1y") == 0);
  CHECK(p.at("b2x") == 0);
  CHECK(p.at("b2y") == 1);
  CHECK(p.at("f1") == 1);
  CHECK(p.at("f2") == 2);
  CHECK(p.at("M1x") == 0);
  CHECK(p.at("M2y") == 0);
  CHECK(p.at("beta1") == 1);
  CHECK(p.at("beta2") == 2);
  CHECK(p.at("alpha1") == 1);
  CHECK(p.at("alpha2") == 2);
  CHECK(s.neumann(make_point(0.5, -0.4))[0] == doctest::Approx(-0.2));
  REQUIRE(s.geometry.subdomains.size() == 1);
  CHECK(s.geometry.subdomains[0].center[1] == -0.5);
  CHECK(s.geometry.subdomains[0].radius == 0.3);
  CHECK(s.geometry.area() == doctest::Approx(4.0));
  CHECK_FALSE(s.j_boundary);
  for (const auto& piece : s.geometry.boundary) {
    const Point mid = 0.5 * (piece.a + piece.b);
    const bool dirichlet = mid[0] < -1 + 1e-9 || mid[1] < -1 + 1e-9;
    CHECK((piece.marker == BoundaryMarker::dirichlet) == dirichlet);
  }
}

TEST_CASE("example2 adds the nonlinear outer material") {
  const ProblemSpec s = build_example("example2");
  const auto& p = s.parameters;
  CHECK(p.at("beta_tilde1") == 1);
  CHECK(p.at("beta_tilde2") == 2);
  CHECK(p.at("gamma_tilde") == 1);
  CHECK(p.at("M1x") == 1);
  CHECK(p.at("M2y") == 1);
  REQUIRE(s.j_boundary);
  CHECK(s.j_boundary(Point{}, make_point(3, 0), Mat2<double>{}) == doctest::Approx(9.0));
  // alpha_out(u) = u^3: the reaction part of A1 at Du = 0.
  CHECK(s.outside.A1(Point{}, make_point(2, 0), Mat2<double>{})[0] == doctest::Approx(8.0));
  CHECK(s.inside.A1(Point{}, make_point(2, 0), Mat2<double>{})[0] == doctest::Approx(2.0));
  CHECK(s.outside.F2(Point{})(0, 1) == 1.0);
  CHECK(s.inside.F2(Point{})(0, 0) == 1.0);
}

TEST_CASE("example5 data") {
  const ProblemSpec s = build_example("example5");
  const auto& p = s.parameters;
  CHECK(s.components == 2);
  CHECK(p.at("E1") == 0.1);
  CHECK(p.at("E2") == 1000);
  CHECK(p.at("nu1") == 0.3);
  CHECK(p.at("nu2") == 0.3);
  CHECK(s.neumann(Point{})[1] == -20);
  CHECK(s.inside.F1(Point{})[1] == 0);
  CHECK(s.outside.F1(Point{})[1] == -5);
  CHECK(s.load_steps == 20);
  CHECK(s.corrector_damping == 0.002);
  CHECK(s.geometry.area() == doctest::Approx(2.0));
  REQUIRE(s.geometry.subdomains.size() == 3);
  CHECK(s.geometry.subdomains[0].radius == 0.3);
  CHECK(s.geometry.subdomains[1].center[1] == 0.25);
  CHECK(s.geometry.subdomains[2].center[1] == 0.75);
}

TEST_CASE("example4 keeps nu = 1/3 and a unit load") {
  const ProblemSpec s = build_example("example4");
  CHECK(s.parameters.at("nu1") == doctest::Approx(1.0 / 3.0));
  CHECK(s.neumann(Point{})[1] == -1);
  CHECK(s.load_steps == 1);
  CHECK(s.corrector_damping == 1.0);
}

TEST_CASE("Neumann segment placement") {
  const ProblemSpec edge = build_example("example4");
  CHECK(edge.geometry.load_lines.empty());
  bool right_edge = false;
  for (const auto& piece : edge.geometry.boundary)
    if (piece.marker == BoundaryMarker::neumann) right_edge = piece.a[0] == 2.0 && piece.b[0] == 2.0;
  CHECK(right_edge);
  const ProblemSpec literal = build_example("example4", {{"neumann_literal", 1}});
  REQUIRE(literal.geometry.load_lines.size() == 1);
  CHECK(literal.geometry.load_lines[0].a[0] == 1.0);
}

TEST_CASE("Lame parameters") {
  auto l = lame_from_engineering(1000, 1.0 / 3.0);
  CHECK(l.mu == doctest::Approx(375));
  CHECK(l.lambda == doctest::Approx(750));
  l = lame_from_engineering(0.1, 1.0 / 3.0);
  CHECK(l.mu == doctest::Approx(0.0375));
  CHECK(l.lambda == doctest::Approx(0.075));
  l = lame_from_engineering(3.0, 0.0);
  CHECK(l.lambda == 0.0);
  CHECK(l.mu == doctest::Approx(1.5));
  CHECK_THROWS_AS(lame_from_engineering(-1, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(lame_from_engineering(1, 0.5), std::invalid_argument);
}

TEST_CASE("St. Venant-Kirchhoff stress") {
  const Mat2<double> zero = stvk_stress(Mat2<double>{}, 2.0, 3.0);
  for (double v : zero.a) CHECK(v == 0.0);
  gen::Source src(21);
  for (int n = 0; n < 20; ++n) {
    const Mat2<double> Q = src.rotation();
    const Mat2<double> Du = src.matrix(0.4);
    const Mat2<double> I = Mat2<double>::identity();
    const Mat2<double> lhs = stvk_stress(Q * (I + Du) - I, 0.8, 1.1);
    const Mat2<double> rhs = Q * stvk_stress(Du, 0.8, 1.1);
    for (std::size_t i = 0; i < 4; ++i) CHECK(lhs.a[i] == doctest::Approx(rhs.a[i]).epsilon(1e-12));
  }
}

TEST_CASE("reluctivity stays in its window and s * beta(s) increases") {
  const double nu0 = 1e7 / (4 * pi);
  double previous = -1.0;
  for (int k = 0; k <= 10000; ++k) {
    const double s = 10.0 * k / 10000;
    const double b = reluctivity(s * s, nu0);
    CHECK(b >= 200.0);
    CHECK(b <= nu0);
    const double flux = s * b;
    CHECK(flux > previous);
    previous = flux;
  }
}

TEST_CASE("region dispatch picks the side's coefficient exactly") {
  const ProblemSpec spec = build_example("example2");
  auto mesh = std::make_shared<Mesh>(triangulate_domain(spec.geometry, 0.2));
  const StateForm form(spec, mesh->regions);
  gen::Source src(22);
  for (int t = 0; t < mesh->num_triangles(); ++t) {
    const Point x = mesh->centroid(t);
    const StatePoint s = src.state(x, 1, 1.0);
    Vec2<double> a1;
    Mat2<double> a2;
    form.flux(t, x, s.y1, s.y2, a1, a2);
    const Material& m = mesh->regions[static_cast<std::size_t>(t)] == Region::inside ? spec.inside : spec.outside;
    const Vec2<double> e1 = m.A1(x, s.y1, s.y2) - m.F1(x);
    const Mat2<double> e2 = m.A2(x, s.y1, s.y2) - m.F2(x);
    CHECK(a1[0] == e1[0]);
    CHECK(a2(0, 0) == e2(0, 0));
    CHECK(a2(0, 1) == e2(0, 1));
  }
}

TEST_CASE("every example callback is AD compatible") {
  gen::Source src(23);
  for (const auto& name : example_names()) {
    const ProblemSpec spec = build_example(name);
    for (int n = 0; n < 100; ++n) {
      const StatePoint s = src.state(src.point(0, 1), spec.components, 2.0);
      for (const Material* m : {&spec.inside, &spec.outside}) {
        CHECK(full_jacobian(m->A1, s, spec.components).allFinite());
        CHECK(full_jacobian(m->A2, s, spec.components).allFinite());
        CHECK(full_jacobian(m->j, s, spec.components).allFinite());
      }
    }
  }
}

TEST_CASE("overrides") {
  const ProblemSpec s = build_example("example1", {{"beta1", 5.0}});
  CHECK(s.inside.A2(Point{}, Vec2<double>{}, make_mat(1.0, 0.0, 0.0, 0.0))(0, 0) == 5.0);
  CHECK_THROWS_AS(build_example("example1", {{"E1", 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(build_example("example3"), std::invalid_argument);
  CHECK_THROWS_AS(build_example("example5", {{"load_steps", 2.5}}), std::invalid_argument);
}

TEST_CASE("example1 closed form from its terms") {
  const ProblemSpec s = build_example("example1");
  const ClosedFormInputs in{0.5, make_point(0.3, -0.2), -0.4, make_point(0.1, 0.7)};
  const double gu_gp = 0.3 * 0.1 - 0.2 * 0.7;
  // beta = (1, 2), b1 - b2 = (1, -1), alpha = (1, 2), f = (1, 2), alpha_tilde = (1, 2).
  const double expected = 2 * 2 * (1 - 2) / 3.0 * gu_gp + 2 * 2 / 3.0 * (0.3 + 0.2) * (-0.4) + (1 - 2) * 0.5 * (-0.4) -
                          (1 - 2) * (-0.4) + (1 - 2) * 0.25;
  CHECK(example1_closed_form(s, in) == doctest::Approx(expected));
  CHECK_THROWS_AS(example1_closed_form(build_example("example2"), in), std::invalid_argument);
}
