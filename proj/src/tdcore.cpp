#include "topoforge/tdcore.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "topoforge/error.hpp"

namespace topoforge {

namespace {

std::size_t sz(int i) { return static_cast<std::size_t>(i); }

struct GaussNode {
  double s;
  double w;
};

// 5-point Gauss-Legendre on [0, 1].
const std::array<GaussNode, 5>& gauss5() {
  static const std::array<GaussNode, 5> nodes = [] {
    const double x1 = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    const double x2 = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    const double w0 = 128.0 / 225.0;
    const double w1 = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
    const double w2 = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
    return std::array<GaussNode, 5>{{{0.5 * (1 - x2), 0.5 * w2},
                                     {0.5 * (1 - x1), 0.5 * w1},
                                     {0.5, 0.5 * w0},
                                     {0.5 * (1 + x1), 0.5 * w1},
                                     {0.5 * (1 + x2), 0.5 * w2}}};
  }();
  return nodes;
}

// Derivatives of the three blocks, contracted with the adjoint data, along
// (0, dk) at the state (u0z, du).
struct BlockDerivatives {
  double a1 = 0.0, a2 = 0.0, j = 0.0;
};

BlockDerivatives block_derivatives(const Material& mat, const FrozenPointData& frozen, const AdjointPointData& adj,
                                   const Mat2<double>& du, const Mat2<double>& dk) {
  Vec2<Dual> y1;
  Mat2<Dual> y2;
  for (int i = 0; i < 2; ++i) y1[i] = Dual(frozen.u0z[i]);
  for (std::size_t i = 0; i < 4; ++i) y2.a[i] = Dual(du.a[i], dk.a[i]);
  const Point z = frozen.z;
  BlockDerivatives d;
  const Vec2<Dual> a1 = mat.A1(z, y1, y2);
  detail::check_finite(a1, z);
  d.a1 = a1[0].deriv * adj.p0z[0] + a1[1].deriv * adj.p0z[1];
  const Mat2<Dual> a2 = mat.A2(z, y1, y2);
  detail::check_finite(a2, z);
  for (std::size_t i = 0; i < 4; ++i) d.a2 += a2.a[i].deriv * adj.Dp0z.a[i];
  if (mat.j) {
    const Dual j = mat.j(z, y1, y2);
    detail::check_finite(j, z);
    d.j = j.deriv;
  }
  return d;
}

}  // namespace

TermSplit term_R1(const ProblemSpec& spec, const FrozenPointData& frozen, const FieldFunction& K,
                  const AdjointPointData& adjoint, double omega_area) {
  const Mesh& mesh = K.mesh();
  const auto geometry = element_geometry(mesh);
  TermSplit out;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Mat2<double> dk = K.gradient(t, geometry[sz(t)]);
    if (dk.a == Mat2<double>{}.a) continue;
    const Material& mat = spec.material(mesh.regions[sz(t)]);
    try {
      const BlockDerivatives base = block_derivatives(mat, frozen, adjoint, frozen.Du0z, dk);
      TermSplit rem;
      for (const auto& node : gauss5()) {
        const BlockDerivatives d = block_derivatives(mat, frozen, adjoint, frozen.Du0z + node.s * dk, dk);
        rem.a1 += node.w * (d.a1 - base.a1);
        rem.a2 += node.w * (d.a2 - base.a2);
        rem.j += node.w * (d.j - base.j);
      }
      const double area = geometry[sz(t)].area;
      out.a1 += area * rem.a1;
      out.a2 += area * rem.a2;
      out.j += area * rem.j;
    } catch (const EvaluationError&) {
      throw EvaluationError(std::string("R1 integrand non-finite in ball triangle ") + std::to_string(t), mesh.centroid(t));
    }
  }
  out.a1 /= omega_area;
  out.a2 /= omega_area;
  out.j /= omega_area;
  return out;
}

TermSplit term_R2(const ProblemSpec& spec, const FrozenPointData& frozen, const FieldFunction& K,
                  const AdjointPointData& adjoint, double omega_area) {
  const Mesh& mesh = K.mesh();
  const auto geometry = element_geometry(mesh);
  TermSplit out;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.regions[sz(t)] != Region::inside) continue;
    const Mat2<double> dk = K.gradient(t, geometry[sz(t)]);
    const BlockDerivatives in = block_derivatives(spec.inside, frozen, adjoint, frozen.Du0z, dk);
    const BlockDerivatives ext = block_derivatives(spec.outside, frozen, adjoint, frozen.Du0z, dk);
    const double area = geometry[sz(t)].area;
    out.a1 += area * (in.a1 - ext.a1);
    out.a2 += area * (in.a2 - ext.a2);
    out.j += area * (in.j - ext.j);
  }
  out.a1 /= omega_area;
  out.a2 /= omega_area;
  out.j /= omega_area;
  return out;
}

TermSplit term_R2(const ProblemSpec& spec, const FrozenPointData& frozen, const Mat2<double>& omega_integral_DK,
                  const AdjointPointData& adjoint, double omega_area) {
  const BlockDerivatives in = block_derivatives(spec.inside, frozen, adjoint, frozen.Du0z, omega_integral_DK);
  const BlockDerivatives ext = block_derivatives(spec.outside, frozen, adjoint, frozen.Du0z, omega_integral_DK);
  return {(in.a1 - ext.a1) / omega_area, (in.a2 - ext.a2) / omega_area, (in.j - ext.j) / omega_area};
}

TermSplit term_dL(const ProblemSpec& spec, const FrozenPointData& frozen, const AdjointPointData& adjoint) {
  const Point z = frozen.z;
  const Material& in = spec.inside;
  const Material& ext = spec.outside;
  TermSplit out;
  const Vec2<double> a1 = in.A1(z, frozen.u0z, frozen.Du0z) - ext.A1(z, frozen.u0z, frozen.Du0z);
  Vec2<double> f1{};
  if (in.F1) f1 += in.F1(z);
  if (ext.F1) f1 -= ext.F1(z);
  out.a1 = dot(a1 - f1, adjoint.p0z);
  const Mat2<double> a2 = in.A2(z, frozen.u0z, frozen.Du0z) - ext.A2(z, frozen.u0z, frozen.Du0z);
  Mat2<double> f2{};
  if (in.F2) f2 += in.F2(z);
  if (ext.F2) f2 -= ext.F2(z);
  out.a2 = contract(a2 - f2, adjoint.Dp0z);
  const double jin = in.j ? in.j(z, frozen.u0z, frozen.Du0z) : 0.0;
  const double jout = ext.j ? ext.j(z, frozen.u0z, frozen.Du0z) : 0.0;
  out.j = jin - jout;
  for (double v : {out.a1, out.a2, out.j})
    if (!std::isfinite(v)) throw EvaluationError("non-finite pointwise term", z);
  return out;
}

TDReport assemble_report(const ProblemSpec& spec, const FrozenPointData& frozen, const AdjointPointData& adjoint,
                         const FieldFunction& K, double omega_area) {
  TDReport r;
  r.z = frozen.z;
  r.frozen = frozen;
  r.adjoint = adjoint;
  r.omega_area = omega_area;
  r.r1 = term_R1(spec, frozen, K, adjoint, omega_area);
  r.r2 = term_R2(spec, frozen, K, adjoint, omega_area);
  r.dl = term_dL(spec, frozen, adjoint);
  r.R1 = r.r1.sum();
  r.R2 = r.r2.sum();
  r.dL = r.dl.sum();
  r.total = r.R1 + r.R2 + r.dL;
  return r;
}

UnperturbedSolution solve_unperturbed(const ProblemSpec& spec, std::shared_ptr<const Mesh> mesh,
                                      const NewtonOptions& options) {
  UnperturbedSolution s;
  s.mesh = mesh;
  s.u0 = solve_state(spec, mesh, options, &s.state_report);
  s.p0 = solve_adjoint(spec, s.u0);
  s.locator = std::make_shared<PointLocator>(*mesh);
  return s;
}

BallMesh make_ball(const InclusionShape& shape, const LocalMeshOptions& local) {
  const BallCore core = build_core(shape, local);
  BallMesh b;
  b.mesh = std::make_shared<Mesh>(build_ball(core, local.ball_radius));
  b.omega_area = core.inclusion_area;
  b.h_inclusion = local.h_inclusion;
  return b;
}

TDReport topological_derivative(const ProblemSpec& spec, const UnperturbedSolution& solution, Point z,
                                const InclusionShape& shape, const BallMesh& ball, const TDOptions& options) {
  if (!spec.geometry.contains(z)) throw std::invalid_argument("z lies outside D");
  if (spec.in_omega(z) || spec.geometry.distance_to_omega(z) == 0.0)
    throw std::invalid_argument("z must lie in D outside the closure of Omega");
  const FrozenPointData frozen = freeze(solution.u0, z, solution.locator.get());
  const PointValue p = evaluate_at(solution.p0, z, solution.locator.get());
  const AdjointPointData adjoint{p.value, p.gradient};

  CorrectorOptions copt = options.corrector;
  if (options.corrector_damping_from_spec) copt.damping = spec.corrector_damping;
  const CorrectorBundle bundle = solve_corrector(spec, frozen, ball.mesh, copt);

  TDReport r = assemble_report(spec, frozen, adjoint, bundle.K, ball.omega_area);
  r.shape = shape.id();
  r.omega_area_exact = shape.area();
  r.R = bundle.R;
  r.ball_vertices = ball.mesh->num_vertices();
  r.design_vertices = solution.mesh->num_vertices();
  r.h_inclusion = ball.h_inclusion;
  r.corrector_iterations = bundle.iterations;
  r.corrector_residual = bundle.residual_norm;
  return r;
}

TDReport topological_derivative(const ProblemSpec& spec, Point z, const InclusionShape& shape,
                                const TDOptions& options) {
  if (!spec.geometry.contains(z)) throw std::invalid_argument("z lies outside D");
  auto mesh = std::make_shared<Mesh>(
      triangulate_domain(spec.geometry, options.h_coarse, RefineSpec{z, options.h_fine, options.refine_radius}));
  NewtonOptions state = options.state;
  if (options.load_steps_from_spec) state.load_steps = spec.load_steps;
  const UnperturbedSolution solution = solve_unperturbed(spec, mesh, state);
  return topological_derivative(spec, solution, z, shape, make_ball(shape, options.local), options);
}

}  // namespace topoforge
