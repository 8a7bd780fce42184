#include "topoforge/fieldeval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

#include "topoforge/autodiff.hpp"
#include "topoforge/corrector.hpp"
#include "topoforge/csv.hpp"
#include "topoforge/linear_solver.hpp"

namespace topoforge {

namespace {

std::size_t sz(int i) { return static_cast<std::size_t>(i); }

constexpr double probe_tol = 1e-10;

// Runs job(k) for k in [0, n) on up to `threads` threads.
template <class Job>
void parallel_for(int n, int threads, const Job& job) {
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < n; k = next++) job(k);
  };
  std::vector<std::thread> pool;
  for (int i = 1; i < std::clamp(threads, 1, std::max(n, 1)); ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

std::vector<Point> probe_points(const ProblemSpec& spec) {
  const DomainGeometry& g = spec.geometry;
  Point lo = spec.default_z, hi = spec.default_z;
  auto grow = [&](Point p) {
    lo = make_point(std::min(lo[0], p[0]), std::min(lo[1], p[1]));
    hi = make_point(std::max(hi[0], p[0]), std::max(hi[1], p[1]));
  };
  for (const auto& piece : g.boundary) grow(piece.a);
  if (g.outer_circle) {
    const Circle& c = *g.outer_circle;
    grow(c.center - make_point(c.radius, c.radius));
    grow(c.center + make_point(c.radius, c.radius));
  }
  std::vector<Point> out{spec.default_z};
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> ux(lo[0], hi[0]), uy(lo[1], hi[1]);
  for (int tries = 0; tries < 200 && out.size() < 6; ++tries) {
    const Point p = make_point(ux(rng), uy(rng));
    if (g.contains(p) && !g.in_omega(p)) out.push_back(p);
  }
  return out;
}

std::vector<StatePoint> random_states(Point x, int m, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<StatePoint> out;
  out.push_back({x, {}, {}});
  for (int s = 0; s < 3; ++s) {
    StatePoint p{x, {}, {}};
    for (int i = 0; i < m; ++i) {
      p.y1[i] = u(rng);
      for (int k = 0; k < 2; ++k) p.y2(i, k) = u(rng);
    }
    out.push_back(p);
  }
  return out;
}

double max_abs(const Eigen::MatrixXd& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

Mat2<double> unit(int i, int j) {
  Mat2<double> e{};
  e(i, j) = 1.0;
  return e;
}

Mat2<double> apply(const Eigen::Matrix4d& a, const Mat2<double>& y) {
  Mat2<double> out{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out.a[sz(r)] += a(r, c) * y.a[sz(c)];
  return out;
}

Mat2<double> load_jump(const ProblemSpec& spec, Point x) {
  Mat2<double> f{};
  if (spec.inside.F2) f += spec.inside.F2(x);
  if (spec.outside.F2) f -= spec.outside.F2(x);
  return f;
}

Mat2<double> offset_at(const ProblemSpec& spec, Point x) {
  return load_jump(spec, x) - (spec.inside.A2(x, Vec2<double>{}, Mat2<double>{}) -
                               spec.outside.A2(x, Vec2<double>{}, Mat2<double>{}));
}

double mat_max(const Mat2<double>& a) {
  double s = 0.0;
  for (double v : a.a) s = std::max(s, std::abs(v));
  return s;
}

}  // namespace

void check_superposition_premise(const ProblemSpec& spec) {
  const int m = spec.components;
  const auto points = probe_points(spec);
  std::mt19937 rng(11);
  for (const auto& [side, mat] : {std::pair<const char*, const Material*>{"in", &spec.inside},
                                  std::pair<const char*, const Material*>{"out", &spec.outside}}) {
    const std::string name = std::string("A2_") + side;
    const Eigen::MatrixXd ref = full_jacobian(mat->A2, StatePoint{points.front(), {}, {}}, m);
    const Eigen::MatrixXd ref_y2 = ref.rightCols(m * 2);
    const double scale = 1.0 + max_abs(ref_y2);
    for (Point x : points)
      for (const StatePoint& at : random_states(x, m, rng)) {
        const Eigen::MatrixXd jac = full_jacobian(mat->A2, at, m);
        if (max_abs(jac.leftCols(m)) > probe_tol * scale)
          throw LinearityError("d" + name + "/du", "coefficient depends on u; superposition needs A2 independent of u");
        if (max_abs(jac.rightCols(m * 2) - ref_y2) > probe_tol * scale)
          throw LinearityError("d" + name + "/dDu", "derivative is not constant; A2 must be affine in Du");
      }
  }
  const Mat2<double> ref = offset_at(spec, points.front());
  for (Point x : points)
    if (mat_max(offset_at(spec, x) - ref) > probe_tol * (1.0 + mat_max(ref)))
      throw LinearityError("F2_in - F2_out", "jump data vary with the point; K_hat would depend on z");
}

bool affine_in_gradient(const ProblemSpec& spec) {
  const int m = spec.components;
  std::mt19937 rng(13);
  for (const Material* mat : {&spec.inside, &spec.outside})
    for (Point x : probe_points(spec))
      for (const StatePoint& at : random_states(x, m, rng)) {
        const StatePoint flat{at.x, at.y1, Mat2<double>{}};
        auto differs = [&](const auto& f) {
          if (!f) return false;
          const Eigen::MatrixXd a = full_jacobian(f, at, m).rightCols(m * 2);
          const Eigen::MatrixXd b = full_jacobian(f, flat, m).rightCols(m * 2);
          return max_abs(a - b) > probe_tol * (1.0 + max_abs(b));
        };
        if (differs(mat->A1) || differs(mat->A2) || differs(mat->j)) return false;
      }
  return true;
}

Mat2<double> omega_integral(const FieldFunction& K) {
  const Mesh& mesh = K.mesh();
  const auto geometry = element_geometry(mesh);
  Mat2<double> out{};
  for (int t = 0; t < mesh.num_triangles(); ++t)
    if (mesh.regions[sz(t)] == Region::inside) out += geometry[sz(t)].area * K.gradient(t, geometry[sz(t)]);
  return out;
}

CorrectorBasis precompute_basis(const ProblemSpec& spec, const InclusionShape& shape, const BallMesh& ball,
                                int threads) {
  check_superposition_premise(spec);
  const int m = spec.components;
  CorrectorBasis basis;
  basis.shape = shape.id();
  basis.ball = ball;
  basis.components = m;
  const FrozenPointData origin{spec.default_z, {}, {}};
  basis.a2_in = flux_linearization(spec.inside.A2, origin, m);
  basis.a2_out = flux_linearization(spec.outside.A2, origin, m);
  basis.rhs_hat = offset_at(spec, spec.default_z);
  basis.r1_vanishes = affine_in_gradient(spec);

  const Eigen::Matrix4d contrast = basis.a2_in - basis.a2_out;
  std::vector<Mat2<double>> rhs{basis.rhs_hat};
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < 2; ++j) rhs.push_back(-1.0 * apply(contrast, unit(i, j)));

  std::vector<FieldFunction> fields(rhs.size());
  std::vector<Mat2<double>> integrals(rhs.size());
  parallel_for(static_cast<int>(rhs.size()), threads, [&](int k) {
    fields[sz(k)] = solve_linear_corrector(basis.a2_in, basis.a2_out, m, ball.mesh, rhs[sz(k)], "basis");
    integrals[sz(k)] = omega_integral(fields[sz(k)]);
  });
  basis.K_hat = std::move(fields.front());
  basis.omega_integral_hat = integrals.front();
  basis.K_tilde.assign(std::make_move_iterator(fields.begin() + 1), std::make_move_iterator(fields.end()));
  basis.omega_integral_tilde.assign(integrals.begin() + 1, integrals.end());
  return basis;
}

namespace {

void check_rows(const CorrectorBasis& basis, const Mat2<double>& Du0z) {
  for (int i = basis.components; i < 2; ++i)
    if (Du0z(i, 0) != 0.0 || Du0z(i, 1) != 0.0)
      throw std::invalid_argument("gradient has " + std::to_string(i + 1) + " rows, basis has " +
                                  std::to_string(basis.components) + " component(s)");
}

}  // namespace

FieldFunction superpose(const CorrectorBasis& basis, const Mat2<double>& Du0z) {
  check_rows(basis, Du0z);
  FieldFunction K = basis.K_hat;
  for (int i = 0; i < basis.components; ++i)
    for (int j = 0; j < 2; ++j) K.values() += Du0z(i, j) * basis.K_tilde[sz(2 * i + j)].values();
  return K;
}

Mat2<double> superpose_omega_integral(const CorrectorBasis& basis, const Mat2<double>& Du0z) {
  check_rows(basis, Du0z);
  Mat2<double> out = basis.omega_integral_hat;
  for (int i = 0; i < basis.components; ++i)
    for (int j = 0; j < 2; ++j) out += Du0z(i, j) * basis.omega_integral_tilde[sz(2 * i + j)];
  return out;
}

int TDFieldMap::flagged_count() const {
  return static_cast<int>(std::count(flagged.begin(), flagged.end(), 1));
}

TDFieldMap td_field(const ProblemSpec& spec, const CorrectorBasis& basis, const UnperturbedSolution& solution,
                    const FieldOptions& options) {
  const Mesh& mesh = *solution.mesh;
  const int n = mesh.num_triangles();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  TDFieldMap map;
  map.mesh = solution.mesh;
  map.shape = basis.shape;
  map.centroids.resize(sz(n));
  map.total.assign(sz(n), nan);
  map.R1.assign(sz(n), nan);
  map.R2.assign(sz(n), nan);
  map.dL.assign(sz(n), nan);
  map.flagged.assign(sz(n), 0);
  const double area = basis.ball.omega_area;
  const std::uint64_t solves_before = linear_solve_count();

  parallel_for(n, options.threads, [&](int t) {
    const Point z = mesh.centroid(t);
    map.centroids[sz(t)] = z;
    // The basis freezes the inclusion as "inside" material in "outside" surroundings.
    if (mesh.regions[sz(t)] == Region::inside) {
      map.flagged[sz(t)] = 1;
      return;
    }
    try {
      const FrozenPointData frozen = freeze(solution.u0, z, solution.locator.get());
      const PointValue p = evaluate_at(solution.p0, z, solution.locator.get());
      const AdjointPointData adjoint{p.value, p.gradient};
      const TermSplit r2 = term_R2(spec, frozen, superpose_omega_integral(basis, frozen.Du0z), adjoint, area);
      const TermSplit dl = term_dL(spec, frozen, adjoint);
      double r1 = 0.0;
      if (!basis.r1_vanishes) r1 = term_R1(spec, frozen, superpose(basis, frozen.Du0z), adjoint, area).sum();
      map.R1[sz(t)] = r1;
      map.R2[sz(t)] = r2.sum();
      map.dL[sz(t)] = dl.sum();
      map.total[sz(t)] = r1 + r2.sum() + dl.sum();
    } catch (const Error&) {
      map.flagged[sz(t)] = 1;
    }
  });
  map.linear_solves = linear_solve_count() - solves_before;
  return map;
}

std::vector<double> example1_closed_form_field(const ProblemSpec& spec, const UnperturbedSolution& solution) {
  const Mesh& mesh = *solution.mesh;
  std::vector<double> out(sz(mesh.num_triangles()), std::numeric_limits<double>::quiet_NaN());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.regions[sz(t)] == Region::inside) continue;
    const Point z = mesh.centroid(t);
    const PointValue u = evaluate_at(solution.u0, z, solution.locator.get());
    const PointValue p = evaluate_at(solution.p0, z, solution.locator.get());
    const ClosedFormInputs in{u.value[0], make_point(u.gradient(0, 0), u.gradient(0, 1)), p.value[0],
                              make_point(p.gradient(0, 0), p.gradient(0, 1))};
    out[sz(t)] = example1_closed_form(spec, in);
  }
  return out;
}

namespace {

std::vector<double> difference(const TDFieldMap& map, const std::vector<double>& reference) {
  if (reference.size() != map.total.size()) throw std::invalid_argument("reference field has the wrong length");
  std::vector<double> d(map.total.size());
  for (std::size_t t = 0; t < d.size(); ++t) d[t] = map.total[t] - reference[t];
  return d;
}

}  // namespace

void write_field_vtk(std::ostream& os, const TDFieldMap& map, const std::vector<double>* reference) {
  std::vector<VtkField> cells{{"td", 1, map.total}, {"R1", 1, map.R1}, {"R2", 1, map.R2}, {"dL", 1, map.dL}};
  cells.push_back({"flagged", 1, std::vector<double>(map.flagged.begin(), map.flagged.end())});
  if (reference) {
    cells.push_back({"reference", 1, *reference});
    cells.push_back({"difference", 1, difference(map, *reference)});
  }
  write_vtk(os, *map.mesh, cells);
}

void write_field_csv(std::ostream& os, const TDFieldMap& map, const std::vector<double>* reference) {
  CsvWriter csv(os);
  std::vector<std::string> names{"x", "y", "value", "flagged"};
  std::vector<double> diff;
  if (reference) {
    names.insert(names.end(), {"reference", "difference"});
    diff = difference(map, *reference);
  }
  csv.header(names);
  for (std::size_t t = 0; t < map.total.size(); ++t) {
    csv.cell(map.centroids[t][0]).cell(map.centroids[t][1]).cell(map.total[t]).cell(int{map.flagged[t]});
    if (reference) csv.cell((*reference)[t]).cell(diff[t]);
    csv.end_row();
  }
}

}  // namespace topoforge
