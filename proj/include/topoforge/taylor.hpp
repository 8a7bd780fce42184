#pragma once

// Taylor test of the expansion J(Omega_eps) = J(Omega) + |omega_eps| dJ + o(eps^d).

#include <iosfwd>
#include <string>
#include <vector>

#include "topoforge/fem.hpp"
#include "topoforge/local_mesh.hpp"
#include "topoforge/problem.hpp"
#include "topoforge/tdcore.hpp"

namespace topoforge {

struct EpsilonSweep {
  double eps0 = 0.005;
  double delta = 1.5;
  int count = 10;

  // eps0 * delta^k for k = count - 1 down to 0 (decreasing).
  std::vector<double> values() const;
  // Throws std::invalid_argument.
  void validate() const;
};

struct TaylorRow {
  double eps = 0.0;
  double J_perturbed = 0.0;
  double J_reference = 0.0;   // J(Omega) on the same mesh
  double J_difference = 0.0;  // J_perturbed - J_reference summed per triangle
  double inclusion_area = 0.0;
  double delta_J = 0.0;
  bool included = false;
  std::string status;         // ok, noise, failed: <reason>
  int vertices = 0;
};

struct TaylorResult {
  std::string shape;
  double td_total = 0.0;
  std::vector<TaylorRow> rows;
  double slope = 0.0;         // NaN when fewer than two rows are retained
  int dimension = 2;          // reference slopes dimension + 1 and dimension + 2
};

struct TaylorOptions {
  LocalMeshOptions local;
  OuterMeshOptions outer;
  NewtonOptions newton;        // perturbed solves (no load stepping)
  NewtonOptions reference;     // design solve; load_steps from the spec by default
  bool load_steps_from_spec = true;
  double noise_floor = 1e-12;  // rows with delta J < noise_floor * |J(Omega)| are excluded
  int threads = 1;
};

// Perturbation meshes for a shape at z; the reference eps is the smallest
// value of the sweep so that every sweep value shares the outer mesh when it fits.
PerturbationFactory make_factory(const ProblemSpec& spec, Point z, const InclusionShape& shape,
                                 const EpsilonSweep& sweep, const TaylorOptions& options);

// Unperturbed state and adjoint on the finest perturbation mesh (inclusion
// marked outside), and the topological derivative on the factory's ball.
struct TaylorReference {
  UnperturbedSolution solution;
  TDReport td;
};
TaylorReference taylor_reference(const ProblemSpec& spec, const PerturbationFactory& factory,
                                 const EpsilonSweep& sweep, const TaylorOptions& options,
                                 const TDOptions& td_options = {});

// delta J = |J(Omega_eps) - J(Omega) - |omega_eps| td_total| per eps. Failed
// solves are reported in the row status.
TaylorResult run_taylor_test(const ProblemSpec& spec, const PerturbationFactory& factory,
                             const UnperturbedSolution& reference, double td_total, const EpsilonSweep& sweep,
                             const TaylorOptions& options = {});

// Builds the factory and reference itself and uses their TD unless td_total is given.
TaylorResult run_taylor_test(const ProblemSpec& spec, Point z, const InclusionShape& shape, const EpsilonSweep& sweep,
                             const TaylorOptions& options = {}, const double* td_total = nullptr);

// Least-squares slope of log(delta J) against log(eps) over the included rows.
double fit_slope(const std::vector<TaylorRow>& rows);

// Recomputes delta J, inclusion and slope for a different td_total.
TaylorResult with_td(const TaylorResult& result, double td_total, double noise_floor = 1e-12);

struct PlotTable {
  std::vector<std::string> curves;
  std::vector<double> eps;                 // decreasing
  std::vector<std::vector<double>> values; // values[curve][row], NaN where missing
  std::vector<double> factors;
};

// Scales every curve so that it coincides with the first one at the largest
// eps both share. Throws std::invalid_argument on empty input.
PlotTable normalize_for_plot(const std::vector<TaylorResult>& results);

void write_taylor_csv(std::ostream& os, const TaylorResult& result);
void write_plot_table(std::ostream& os, const PlotTable& table);

}  // namespace topoforge
