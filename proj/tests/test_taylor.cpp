#include <cmath>
#include <sstream>

#include "doctest.h"
#include "generators.hpp"
#include "topoforge/taylor.hpp"

using namespace topoforge;

namespace {

TaylorResult synthetic(const std::string& shape, double c, double order, const std::vector<double>& eps) {
  TaylorResult r;
  r.shape = shape;
  for (double e : eps) {
    TaylorRow row;
    row.eps = e;
    row.delta_J = c * std::pow(e, order);
    row.included = true;
    row.status = "ok";
    r.rows.push_back(row);
  }
  r.slope = fit_slope(r.rows);
  return r;
}

// Example-1 disk sweep shared by several cases.
struct DiskSweep {
  ProblemSpec spec = build_example("example1");
  EpsilonSweep sweep;
  TaylorOptions options;
  PerturbationFactory factory = make_factory(spec, spec.default_z, InclusionShape::named("disk"), sweep, options);
  TaylorReference reference = taylor_reference(spec, factory, sweep, options);
  TaylorResult result = run_taylor_test(spec, factory, reference.solution, reference.td.total, sweep, options);
};

const DiskSweep& disk_sweep() {
  static const DiskSweep sweep;
  return sweep;
}

}  // namespace

TEST_CASE("epsilon sweep") {
  const EpsilonSweep s;
  const auto v = s.values();
  REQUIRE(v.size() == 10);
  CHECK(v.front() == doctest::Approx(0.005 * std::pow(1.5, 9)));
  CHECK(v.back() == 0.005);
  for (std::size_t k = 1; k < v.size(); ++k) CHECK(v[k] < v[k - 1]);
  CHECK_THROWS_AS((EpsilonSweep{0.0, 1.5, 10}.values()), std::invalid_argument);
  CHECK_THROWS_AS((EpsilonSweep{0.005, 1.0, 10}.values()), std::invalid_argument);
  CHECK_THROWS_AS((EpsilonSweep{0.005, 1.5, 0}.values()), std::invalid_argument);
}

TEST_CASE("least-squares slope of power laws") {
  gen::Source src(19);
  for (int n = 0; n < 50; ++n) {
    const double order = src.uniform(1.0, 5.0), c = std::exp(src.uniform(-10, 10));
    const auto r = synthetic("s", c, order, EpsilonSweep{src.uniform(0.001, 0.01), src.uniform(1.1, 2.0), 6}.values());
    CHECK(r.slope == doctest::Approx(order).epsilon(1e-9));
  }
  auto r = synthetic("s", 1.0, 3.0, {0.1, 0.05});
  r.rows[1].included = false;
  CHECK(std::isnan(fit_slope(r.rows)));
}

TEST_CASE("normalization rescales curves without changing slopes") {
  gen::Source src(23);
  const auto eps = EpsilonSweep{}.values();
  for (int n = 0; n < 20; ++n) {
    const double c = std::exp(src.uniform(-5, 5));
    const auto a = synthetic("a", 1.0, src.uniform(2, 4), eps);
    auto b = a;
    b.shape = "b";
    for (auto& row : b.rows) row.delta_J *= c;
    const PlotTable t = normalize_for_plot({a, b});
    REQUIRE(t.values.size() == 2);
    CHECK(t.factors[0] == 1.0);
    CHECK(t.factors[1] == doctest::Approx(1.0 / c));
    for (std::size_t k = 0; k < eps.size(); ++k) CHECK(t.values[1][k] == doctest::Approx(t.values[0][k]));
    CHECK(fit_slope(b.rows) == doctest::Approx(a.slope));
  }
  const auto single = synthetic("x", 2.0, 3.0, eps);
  const PlotTable one = normalize_for_plot({single});
  for (std::size_t k = 0; k < eps.size(); ++k) CHECK(one.values[0][k] == single.rows[k].delta_J);
  CHECK_THROWS_AS(normalize_for_plot({}), std::invalid_argument);
}

TEST_CASE("noise-floor rows are excluded") {
  TaylorResult r;
  r.td_total = 1.0;
  for (double e : {0.1, 0.05, 0.025}) {
    TaylorRow row;
    row.eps = e;
    row.J_reference = 1.0;
    row.inclusion_area = 3.14 * e * e;
    row.J_difference = row.inclusion_area + std::pow(e, 3);
    r.rows.push_back(row);
  }
  r.rows[2].J_difference = r.rows[2].inclusion_area;  // exact: delta J = 0
  const TaylorResult f = with_td(r, 1.0);
  CHECK(f.rows[0].included);
  CHECK(f.rows[1].included);
  CHECK_FALSE(f.rows[2].included);
  CHECK(f.rows[2].status == "noise");
  CHECK(f.slope == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("Example-1 disk converges at fourth order") {
  const auto& d = disk_sweep();
  for (const auto& row : d.result.rows) {
    CHECK(row.status == "ok");
    CHECK(row.delta_J > 0.0);
  }
  CAPTURE(d.result.td_total);
  CHECK(d.result.slope >= 3.5);
}

TEST_CASE("a wrong derivative destroys the slope") {
  const auto& d = disk_sweep();
  for (double factor : {0.8, 1.2}) {
    const TaylorResult wrong = with_td(d.result, factor * d.result.td_total);
    CAPTURE(factor);
    CHECK(wrong.slope <= 2.3);
  }
}

TEST_CASE("the closed-form derivative reproduces the slope") {
  const auto& d = disk_sweep();
  const TDReport& td = d.reference.td;
  const ClosedFormInputs at{td.frozen.u0z[0], make_point(td.frozen.Du0z(0, 0), td.frozen.Du0z(0, 1)), td.adjoint.p0z[0],
                            make_point(td.adjoint.Dp0z(0, 0), td.adjoint.Dp0z(0, 1))};
  const double closed = example1_closed_form(d.spec, at);
  const TaylorResult substituted = with_td(d.result, closed);
  CAPTURE(closed);
  CAPTURE(d.result.td_total);
  CHECK(std::abs(substituted.slope - d.result.slope) <= 0.1);
}

TEST_CASE("CSV and plot table layout") {
  const auto r = synthetic("disk", 1.0, 3.0, {0.1, 0.05});
  std::ostringstream csv;
  write_taylor_csv(csv, r);
  CHECK(csv.str().rfind("eps,J_perturbed,J_reference,J_difference,inclusion_area,deltaJ,included_in_fit,status\n", 0) == 0);
  std::ostringstream plot;
  write_plot_table(plot, normalize_for_plot({r}));
  CHECK(plot.str().rfind("# eps disk\n", 0) == 0);
}
