#include "topoforge/corrector.hpp"

#include <cmath>
#include <stdexcept>

#include "topoforge/error.hpp"

namespace topoforge {

namespace {

void require_finite(const FrozenPointData& f) {
  bool ok = std::isfinite(f.z[0]) && std::isfinite(f.z[1]);
  for (int i = 0; i < 2; ++i) ok = ok && std::isfinite(f.u0z[i]);
  for (double v : f.Du0z.a) ok = ok && std::isfinite(v);
  if (!ok) throw std::invalid_argument("frozen point data contains non-finite values");
}

std::size_t sz(int i) { return static_cast<std::size_t>(i); }

// Flux a2(y2) given as 4x4 matrices per side minus chi_w rhs.
class LinearCorrectorForm : public FluxForm {
 public:
  LinearCorrectorForm(const Eigen::Matrix4d& in, const Eigen::Matrix4d& out, const std::vector<Region>& regions,
                      const Mat2<double>& rhs)
      : in_(in), out_(out), regions_(&regions), rhs_(rhs) {}
  void flux(int t, Point, const Vec2<double>&, const Mat2<double>& y2, Vec2<double>& a1,
            Mat2<double>& a2) const override {
    eval(t, y2, a1, a2);
  }
  void flux(int t, Point, const Vec2<Dual>&, const Mat2<Dual>& y2, Vec2<Dual>& a1, Mat2<Dual>& a2) const override {
    eval(t, y2, a1, a2);
  }
  bool constant_per_element() const override { return true; }

 private:
  template <class T>
  void eval(int t, const Mat2<T>& y2, Vec2<T>& a1, Mat2<T>& a2) const {
    const bool inside = (*regions_)[sz(t)] == Region::inside;
    const Eigen::Matrix4d& a = inside ? in_ : out_;
    a1 = {};
    for (int r = 0; r < 4; ++r) {
      T s(0.0);
      for (int c = 0; c < 4; ++c)
        if (a(r, c) != 0.0) s += a(r, c) * y2.a[sz(c)];
      if (inside) s -= rhs_.a[sz(r)];
      a2.a[sz(r)] = s;
    }
  }
  Eigen::Matrix4d in_, out_;
  const std::vector<Region>* regions_;
  Mat2<double> rhs_;
};

}  // namespace

FrozenPointData freeze(const FieldFunction& u0, Point z, const PointLocator* locator) {
  const PointValue v = evaluate_at(u0, z, locator);
  return {z, v.value, v.gradient};
}

CorrectorForm::CorrectorForm(const ProblemSpec& spec, const FrozenPointData& frozen, const std::vector<Region>& regions)
    : spec_(&spec), frozen_(frozen), regions_(&regions) {
  const Point z = frozen.z;
  base_in_ = spec.inside.A2(z, frozen.u0z, frozen.Du0z);
  base_out_ = spec.outside.A2(z, frozen.u0z, frozen.Du0z);
  Mat2<double> f2{};
  if (spec.inside.F2) f2 += spec.inside.F2(z);
  if (spec.outside.F2) f2 -= spec.outside.F2(z);
  jump_ = f2 - (base_in_ - base_out_);
}

template <class T>
void CorrectorForm::eval(int t, const Mat2<T>& y2, Mat2<T>& a2) const {
  const bool inside = (*regions_)[sz(t)] == Region::inside;
  const Material& mat = inside ? spec_->inside : spec_->outside;
  Vec2<T> u0z;
  Mat2<T> du;
  for (int i = 0; i < 2; ++i) u0z[i] = T(frozen_.u0z[i]);
  for (std::size_t i = 0; i < 4; ++i) du.a[i] = frozen_.Du0z.a[i] + y2.a[i];
  a2 = mat.A2(frozen_.z, u0z, du);
  const Mat2<double>& base = inside ? base_in_ : base_out_;
  for (std::size_t i = 0; i < 4; ++i) {
    a2.a[i] -= base.a[i];
    if (inside) a2.a[i] -= jump_.a[i];
  }
}

void CorrectorForm::flux(int t, Point, const Vec2<double>&, const Mat2<double>& y2, Vec2<double>& a1,
                         Mat2<double>& a2) const {
  a1 = {};
  eval(t, y2, a2);
}

void CorrectorForm::flux(int t, Point, const Vec2<Dual>&, const Mat2<Dual>& y2, Vec2<Dual>& a1,
                         Mat2<Dual>& a2) const {
  a1 = {};
  eval(t, y2, a2);
}

CorrectorBundle solve_corrector(const ProblemSpec& spec, const FrozenPointData& frozen,
                                std::shared_ptr<const Mesh> ball, const CorrectorOptions& options) {
  require_finite(frozen);
  CorrectorBundle out;
  out.frozen = frozen;
  out.ball = ball;
  for (const Point& p : ball->vertices) out.R = std::max(out.R, norm(p));

  FieldFunction K(ball, spec.components);
  K.constrain({BoundaryMarker::outer_ball});
  const auto& regions = ball->regions;
  const FormFactory factory = [&](double) { return std::make_unique<CorrectorForm>(spec, frozen, regions); };
  NewtonOptions newton;
  newton.tol = options.tol;
  newton.rel_tol = options.rel_tol;
  newton.damping = options.damping;
  newton.max_iter = options.max_iter + (options.damping < 1 ? static_cast<int>(std::ceil(1 / options.damping)) : 0);
  NewtonReport report;
  out.K = solve_newton(factory, std::move(K), newton, "corrector", &report);
  out.iterations = report.iterations;
  out.residual_norm = report.residual;
  out.residual_history = report.history;
  return out;
}

Eigen::Matrix4d flux_linearization(const MatrixCoefficient& a2, const FrozenPointData& frozen, int m) {
  Eigen::Matrix4d out = Eigen::Matrix4d::Zero();
  const StatePoint at{frozen.z, frozen.u0z, frozen.Du0z};
  for (int c = 0; c < m; ++c)
    for (int k = 0; k < 2; ++k) {
      const Mat2<double> col = directional_derivative(a2, at, TangentDirection::gradient(c, k), m, 2);
      for (int r = 0; r < 4; ++r) out(r, 2 * c + k) = col.a[sz(r)];
    }
  return out;
}

FieldFunction solve_linear_corrector(const Eigen::Matrix4d& a2_in, const Eigen::Matrix4d& a2_out, int m,
                                     std::shared_ptr<const Mesh> ball, const Mat2<double>& rhs,
                                     const std::string& stage) {
  FieldFunction K(ball, m);
  K.constrain({BoundaryMarker::outer_ball});
  const auto& regions = ball->regions;
  const FormFactory factory = [&](double) {
    return std::make_unique<LinearCorrectorForm>(a2_in, a2_out, regions, rhs);
  };
  return solve_newton(factory, std::move(K), {}, stage);
}

std::vector<AnnulusNorm> decay_profile(const CorrectorBundle& bundle) {
  const Mesh& mesh = *bundle.ball;
  const int count = static_cast<int>(std::floor(std::log2(bundle.R))) - 1;
  std::vector<AnnulusNorm> out;
  for (int k = 0; k < std::max(count, 0); ++k) out.push_back({std::ldexp(1.0, k), std::ldexp(1.0, k + 1), 0.0, 0.0});
  const auto geometry = element_geometry(mesh);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double r = norm(mesh.centroid(t));
    if (r < 1.0) continue;
    const int k = static_cast<int>(std::floor(std::log2(r)));
    if (k >= static_cast<int>(out.size())) continue;
    const Mat2<double> dk = bundle.K.gradient(t, geometry[sz(t)]);
    out[sz(k)].l2 += geometry[sz(t)].area * contract(dk, dk);
  }
  const double pi = std::acos(-1.0);
  for (auto& a : out) {
    a.l2 = std::sqrt(a.l2);
    a.rms = a.l2 / std::sqrt(pi * (a.outer * a.outer - a.inner * a.inner));
  }
  return out;
}

}  // namespace topoforge
