#pragma once

// Topological derivative at every element centroid of a design mesh for
// problems whose A2 is affine in Du and independent of u. The corrector is
// linear in the frozen gradient, so it is the combination
//   K = K_hat + sum_ij Du0(z)[i,j] K_tilde_ij
// of m*d + 1 fields solved once on a shared ball mesh.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topoforge/error.hpp"
#include "topoforge/fem.hpp"
#include "topoforge/problem.hpp"
#include "topoforge/tdcore.hpp"

namespace topoforge {

// A coefficient fails the affine / u-independence probe. derivative() names it,
// e.g. "dA2_in/du" or "dA2_out/dDu".
class LinearityError : public Error {
 public:
  LinearityError(std::string derivative, const std::string& what)
      : Error(derivative + ": " + what), derivative_(std::move(derivative)) {}
  const std::string& derivative() const { return derivative_; }

 private:
  std::string derivative_;
};

struct CorrectorBasis {
  std::string shape;
  BallMesh ball;
  int components = 1;
  FieldFunction K_hat;
  std::vector<FieldFunction> K_tilde;  // index 2 * i + j
  Eigen::Matrix4d a2_in = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d a2_out = Eigen::Matrix4d::Zero();
  Mat2<double> rhs_hat{};              // (F2_in - F2_out) - (A2_in - A2_out)(., 0, 0)
  // int_w DK for K_hat and each K_tilde (R2 is linear in DK).
  Mat2<double> omega_integral_hat{};
  std::vector<Mat2<double>> omega_integral_tilde;
  // A1, A2 and j are affine in Du on both sides, so R1 vanishes identically.
  bool r1_vanishes = false;

  int size() const { return 1 + static_cast<int>(K_tilde.size()); }
};

// Probes A2 on both sides at sample points of D and random states; throws
// LinearityError when dA2/du != 0, dA2/dDu varies, or the loads F2 make K_hat
// depend on the point (tolerance 1e-10 relative to the coefficient scale).
void check_superposition_premise(const ProblemSpec& spec);

// True when A1, A2, j have y2-derivatives independent of y2 on both sides.
bool affine_in_gradient(const ProblemSpec& spec);

CorrectorBasis precompute_basis(const ProblemSpec& spec, const InclusionShape& shape, const BallMesh& ball,
                                int threads = 1);

// Throws std::invalid_argument when Du0z has entries in rows beyond the
// basis' component count.
FieldFunction superpose(const CorrectorBasis& basis, const Mat2<double>& Du0z);
Mat2<double> superpose_omega_integral(const CorrectorBasis& basis, const Mat2<double>& Du0z);

// int over inside triangles of DK.
Mat2<double> omega_integral(const FieldFunction& K);

struct TDFieldMap {
  std::shared_ptr<const Mesh> mesh;
  std::string shape;
  std::vector<Point> centroids;
  std::vector<double> total, R1, R2, dL;  // NaN on flagged cells
  std::vector<char> flagged;              // centroid in Omega or evaluation failed
  std::uint64_t linear_solves = 0;        // during the centroid loop

  int flagged_count() const;
};

struct FieldOptions {
  int threads = 1;
};

TDFieldMap td_field(const ProblemSpec& spec, const CorrectorBasis& basis, const UnperturbedSolution& solution,
                    const FieldOptions& options = {});

// Example-1 disk formula at every centroid from the same discrete u0, p0.
std::vector<double> example1_closed_form_field(const ProblemSpec& spec, const UnperturbedSolution& solution);

// Cell data: td, R1, R2, dL, flagged; with a reference also reference and difference.
void write_field_vtk(std::ostream& os, const TDFieldMap& map, const std::vector<double>* reference = nullptr);
// Columns x, y, value, flagged (+ reference, difference).
void write_field_csv(std::ostream& os, const TDFieldMap& map, const std::vector<double>* reference = nullptr);

}  // namespace topoforge
