#pragma once

// Topological derivative dJ(z) = R1 + R2 + dL for one inclusion shape.

#include <memory>
#include <string>

#include "topoforge/corrector.hpp"
#include "topoforge/fem.hpp"
#include "topoforge/local_mesh.hpp"
#include "topoforge/problem.hpp"

namespace topoforge {

struct AdjointPointData {
  Vec2<double> p0z{};
  Mat2<double> Dp0z{};
};

// Contributions of the A1 block, the A2 block and the cost density.
struct TermSplit {
  double a1 = 0.0;
  double a2 = 0.0;
  double j = 0.0;
  double sum() const { return a1 + a2 + j; }
};

// (1/|w|) int_{B_R} of the Taylor remainders f(Du0z + DK) - f(Du0z) - f'(Du0z) DK,
// each remainder computed as int_0^1 (f'(Du0z + s DK) - f'(Du0z)) DK ds by
// 5-point Gauss-Legendre. Throws EvaluationError naming the triangle.
TermSplit term_R1(const ProblemSpec& spec, const FrozenPointData& frozen, const FieldFunction& K,
                  const AdjointPointData& adjoint, double omega_area);

// (1/|w|) int_w [d_y2 f_in - d_y2 f_out](DK).
TermSplit term_R2(const ProblemSpec& spec, const FrozenPointData& frozen, const FieldFunction& K,
                  const AdjointPointData& adjoint, double omega_area);
// Same term from int_w DK; the integrand is linear in DK.
TermSplit term_R2(const ProblemSpec& spec, const FrozenPointData& frozen, const Mat2<double>& omega_integral_DK,
                  const AdjointPointData& adjoint, double omega_area);

// Pointwise jumps at z; F1, F2 enter the A1 and A2 blocks.
TermSplit term_dL(const ProblemSpec& spec, const FrozenPointData& frozen, const AdjointPointData& adjoint);

struct TDReport {
  Point z{};
  std::string shape;
  double R1 = 0.0;
  double R2 = 0.0;
  double dL = 0.0;
  double total = 0.0;
  TermSplit r1, r2, dl;
  FrozenPointData frozen;
  AdjointPointData adjoint;
  double omega_area = 0.0;        // meshed area of omega in the ball (the normalization)
  double omega_area_exact = 0.0;
  double R = 0.0;
  int ball_vertices = 0;
  int design_vertices = 0;
  double h_inclusion = 0.0;
  int corrector_iterations = 0;
  double corrector_residual = 0.0;
};

// R1 + R2 + dL in that order.
TDReport assemble_report(const ProblemSpec& spec, const FrozenPointData& frozen, const AdjointPointData& adjoint,
                         const FieldFunction& K, double omega_area);

// State and adjoint on a design mesh, with a locator for point queries.
struct UnperturbedSolution {
  std::shared_ptr<const Mesh> mesh;
  FieldFunction u0;
  FieldFunction p0;
  std::shared_ptr<const PointLocator> locator;
  NewtonReport state_report;
};

UnperturbedSolution solve_unperturbed(const ProblemSpec& spec, std::shared_ptr<const Mesh> mesh,
                                      const NewtonOptions& options);

// Ball mesh and the meshed inclusion area for a shape.
struct BallMesh {
  std::shared_ptr<const Mesh> mesh;
  double omega_area = 0.0;
  double h_inclusion = 0.0;
};
BallMesh make_ball(const InclusionShape& shape, const LocalMeshOptions& local);

struct TDOptions {
  LocalMeshOptions local;
  CorrectorOptions corrector;  // damping defaults to the spec's corrector_damping
  bool corrector_damping_from_spec = true;
  double h_coarse = 0.05;      // design mesh, refined around z
  double h_fine = 0.05 / 32;
  double refine_radius = 0.1;
  NewtonOptions state;         // load_steps defaults to the spec's value
  bool load_steps_from_spec = true;
};

TDReport topological_derivative(const ProblemSpec& spec, const UnperturbedSolution& solution, Point z,
                                const InclusionShape& shape, const BallMesh& ball, const TDOptions& options = {});

// Full pipeline: design mesh refined at z, state, adjoint, ball, corrector, terms.
TDReport topological_derivative(const ProblemSpec& spec, Point z, const InclusionShape& shape,
                                const TDOptions& options = {});

}  // namespace topoforge
