#pragma once

// Corrector K on the truncated ball B_R: coefficients frozen at (z, u0(z),
// Du0(z)), jump data supported in omega, K = 0 on the outer boundary.

#include <memory>
#include <vector>

#include "topoforge/fem.hpp"
#include "topoforge/problem.hpp"

namespace topoforge {

struct FrozenPointData {
  Point z{};
  Vec2<double> u0z{};
  Mat2<double> Du0z{};
};

// u0 and its (edge-averaged) gradient at z; throws EvaluationError outside the mesh.
FrozenPointData freeze(const FieldFunction& u0, Point z, const PointLocator* locator = nullptr);

struct CorrectorOptions {
  double damping = 1.0;
  double tol = 1e-10;
  double rel_tol = 1e-12;
  int max_iter = 60;  // raised by 1 / damping for damped runs
};

struct CorrectorBundle {
  FrozenPointData frozen;
  std::shared_ptr<const Mesh> ball;
  FieldFunction K;
  double R = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;
};

// Flux A2^w(z, u0z, Du0z + DK) - A2^w(z, u0z, Du0z) - chi_w [(F2_in - F2_out)(z)
// - (A2_in - A2_out)(z, u0z, Du0z)]; A1 and F1 do not enter.
class CorrectorForm : public FluxForm {
 public:
  CorrectorForm(const ProblemSpec& spec, const FrozenPointData& frozen, const std::vector<Region>& regions);
  void flux(int t, Point x, const Vec2<double>& y1, const Mat2<double>& y2, Vec2<double>& a1,
            Mat2<double>& a2) const override;
  void flux(int t, Point x, const Vec2<Dual>& y1, const Mat2<Dual>& y2, Vec2<Dual>& a1,
            Mat2<Dual>& a2) const override;
  bool constant_per_element() const override { return true; }

 private:
  template <class T>
  void eval(int t, const Mat2<T>& y2, Mat2<T>& a2) const;
  const ProblemSpec* spec_;
  FrozenPointData frozen_;
  const std::vector<Region>* regions_;
  Mat2<double> jump_;        // (F2_in - F2_out)(z) - (A2_in - A2_out)(z, u0z, Du0z)
  Mat2<double> base_in_;     // A2_in(z, u0z, Du0z)
  Mat2<double> base_out_;
};

// Throws std::invalid_argument for non-finite frozen data, SolverError("corrector")
// when Newton fails.
CorrectorBundle solve_corrector(const ProblemSpec& spec, const FrozenPointData& frozen,
                                std::shared_ptr<const Mesh> ball, const CorrectorOptions& options = {});

// d A2 / d y2 at the frozen point as a 4x4 map on row-major 2x2 matrices
// (rows/columns of unused components are zero when m = 1).
Eigen::Matrix4d flux_linearization(const MatrixCoefficient& a2, const FrozenPointData& frozen, int m);

// Find K, zero on the outer boundary, with int a2^w DK : Dpsi = int_w rhs : Dpsi
// where a2^w is the linearization in omega (inside) and outside of it.
FieldFunction solve_linear_corrector(const Eigen::Matrix4d& a2_in, const Eigen::Matrix4d& a2_out, int m,
                                     std::shared_ptr<const Mesh> ball, const Mat2<double>& rhs,
                                     const std::string& stage = "corrector");

struct AnnulusNorm {
  double inner = 0.0;
  double outer = 0.0;
  double l2 = 0.0;   // ||DK||_L2 over the annulus
  double rms = 0.0;  // l2 / sqrt(annulus area)
};

// Dyadic annuli [2^k, 2^(k+1)] around the ball centre, k = 0 .. floor(log2 R) - 2;
// triangles assigned by centroid.
std::vector<AnnulusNorm> decay_profile(const CorrectorBundle& bundle);

}  // namespace topoforge
