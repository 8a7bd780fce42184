#include "topoforge/taylor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "topoforge/csv.hpp"
#include "topoforge/error.hpp"

namespace topoforge {

std::vector<double> EpsilonSweep::values() const {
  validate();
  std::vector<double> out;
  for (int k = count - 1; k >= 0; --k) out.push_back(eps0 * std::pow(delta, k));
  return out;
}

void EpsilonSweep::validate() const {
  if (!(eps0 > 0)) throw std::invalid_argument("eps0 must be positive");
  if (!(delta > 1)) throw std::invalid_argument("delta must exceed 1");
  if (count < 1) throw std::invalid_argument("count must be at least 1");
}

PerturbationFactory make_factory(const ProblemSpec& spec, Point z, const InclusionShape& shape,
                                 const EpsilonSweep& sweep, const TaylorOptions& options) {
  sweep.validate();
  OuterMeshOptions outer = options.outer;
  outer.reference_eps = sweep.eps0;
  LocalMeshOptions local = options.local;
  local.delta = sweep.delta;
  return PerturbationFactory(spec.geometry, z, shape, local, outer);
}

TaylorReference taylor_reference(const ProblemSpec& spec, const PerturbationFactory& factory,
                                 const EpsilonSweep& sweep, const TaylorOptions& options,
                                 const TDOptions& td_options) {
  const PerturbedMesh finest = factory.perturbed(sweep.values().back());
  auto mesh = std::make_shared<Mesh>(finest.mesh);
  mesh->regions = finest.reference_regions;
  NewtonOptions newton = options.reference;
  if (options.load_steps_from_spec) newton.load_steps = spec.load_steps;
  TaylorReference ref;
  ref.solution = solve_unperturbed(spec, mesh, newton);
  BallMesh ball;
  ball.mesh = std::make_shared<Mesh>(factory.ball());
  ball.omega_area = factory.core().inclusion_area;
  ball.h_inclusion = options.local.h_inclusion;
  ref.td = topological_derivative(spec, ref.solution, factory.z(), factory.shape(), ball, td_options);
  return ref;
}

namespace {

TaylorRow perturbed_row(const ProblemSpec& spec, const PerturbationFactory& factory,
                        const UnperturbedSolution& reference, double eps, const TaylorOptions& options) {
  TaylorRow row;
  row.eps = eps;
  const PerturbedMesh pm = factory.perturbed(eps);
  auto mesh = std::make_shared<Mesh>(pm.mesh);
  row.vertices = mesh->num_vertices();
  row.inclusion_area = pm.inclusion_area;

  // Unperturbed state on this mesh, then the perturbed one as u0 + w.
  const FieldFunction start = interpolate(reference.u0, mesh);
  NewtonOptions newton = options.newton;
  newton.load_steps = 1;
  const FieldFunction u0 = solve_state(spec, mesh, pm.reference_regions, newton, &start);
  const AssemblyContext ctx(*mesh);
  const Eigen::VectorXd offset = assemble_residual(StateForm(spec, pm.reference_regions), u0, ctx);
  const StateForm perturbed_form(spec, mesh->regions);
  const FieldFunction ue = solve_newton_offset(perturbed_form, u0, offset, newton, "perturbed state");

  const CostBreakdown c0 = evaluate_cost(spec, u0, pm.reference_regions);
  const CostBreakdown ce = evaluate_cost(spec, ue, mesh->regions);
  double diff = ce.boundary - c0.boundary;
  for (std::size_t t = 0; t < c0.per_triangle.size(); ++t) diff += ce.per_triangle[t] - c0.per_triangle[t];
  row.J_reference = c0.total();
  row.J_difference = diff;
  row.J_perturbed = ce.total();
  row.status = "ok";
  return row;
}

void finish(TaylorResult& result, double noise_floor) {
  for (auto& row : result.rows) {
    if (row.status.rfind("failed", 0) == 0) {
      row.included = false;
      continue;
    }
    row.delta_J = std::abs(row.J_difference - row.inclusion_area * result.td_total);
    const bool noise = !(row.delta_J >= noise_floor * std::abs(row.J_reference)) || row.delta_J == 0.0;
    row.included = !noise;
    row.status = noise ? "noise" : "ok";
  }
  result.slope = fit_slope(result.rows);
}

}  // namespace

TaylorResult run_taylor_test(const ProblemSpec& spec, const PerturbationFactory& factory,
                             const UnperturbedSolution& reference, double td_total, const EpsilonSweep& sweep,
                             const TaylorOptions& options) {
  const std::vector<double> eps = sweep.values();
  TaylorResult result;
  result.shape = factory.shape().id();
  result.td_total = td_total;
  result.rows.resize(eps.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < eps.size(); k = next++) {
      try {
        result.rows[k] = perturbed_row(spec, factory, reference, eps[k], options);
      } catch (const Error& e) {
        result.rows[k] = TaylorRow{};
        result.rows[k].eps = eps[k];
        result.rows[k].status = std::string("failed: ") + e.what();
      }
    }
  };
  const int threads = std::clamp(options.threads, 1, static_cast<int>(eps.size()));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  finish(result, options.noise_floor);
  return result;
}

TaylorResult run_taylor_test(const ProblemSpec& spec, Point z, const InclusionShape& shape, const EpsilonSweep& sweep,
                             const TaylorOptions& options, const double* td_total) {
  const PerturbationFactory factory = make_factory(spec, z, shape, sweep, options);
  const TaylorReference ref = taylor_reference(spec, factory, sweep, options);
  return run_taylor_test(spec, factory, ref.solution, td_total ? *td_total : ref.td.total, sweep, options);
}

double fit_slope(const std::vector<TaylorRow>& rows) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    if (!r.included) continue;
    const double x = std::log(r.eps), y = std::log(r.delta_J);
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (n < 2 || den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / den;
}

TaylorResult with_td(const TaylorResult& result, double td_total, double noise_floor) {
  TaylorResult out = result;
  out.td_total = td_total;
  finish(out, noise_floor);
  return out;
}

PlotTable normalize_for_plot(const std::vector<TaylorResult>& results) {
  if (results.empty()) throw std::invalid_argument("no Taylor results to normalize");
  PlotTable table;
  std::map<double, std::size_t, std::greater<>> index;
  for (const auto& r : results)
    for (const auto& row : r.rows) index.emplace(row.eps, 0);
  for (auto& [e, i] : index) {
    i = table.eps.size();
    table.eps.push_back(e);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : results) {
    table.curves.push_back(r.shape);
    std::vector<double> v(table.eps.size(), nan);
    for (const auto& row : r.rows)
      if (row.included) v[index.at(row.eps)] = row.delta_J;
    table.values.push_back(std::move(v));
  }
  // Anchor: largest eps where the first curve and the scaled curve both have data.
  const auto& first = table.values.front();
  for (auto& v : table.values) {
    double factor = 1.0;
    for (std::size_t k = 0; k < v.size(); ++k)
      if (!std::isnan(v[k]) && !std::isnan(first[k])) {
        factor = first[k] / v[k];
        break;
      }
    table.factors.push_back(factor);
  }
  for (std::size_t c = 0; c < table.values.size(); ++c)
    for (double& x : table.values[c]) x *= table.factors[c];
  return table;
}

void write_taylor_csv(std::ostream& os, const TaylorResult& result) {
  CsvWriter csv(os);
  csv.header({"eps", "J_perturbed", "J_reference", "J_difference", "inclusion_area", "deltaJ", "included_in_fit",
              "status"});
  for (const auto& r : result.rows) {
    csv.cell(r.eps).cell(r.J_perturbed).cell(r.J_reference).cell(r.J_difference).cell(r.inclusion_area);
    csv.cell(r.delta_J).cell(r.included ? 1 : 0).cell(r.status);
    csv.end_row();
  }
}

void write_plot_table(std::ostream& os, const PlotTable& table) {
  os << "# eps";
  for (const auto& c : table.curves) os << ' ' << c;
  os << '\n';
  for (std::size_t k = 0; k < table.eps.size(); ++k) {
    os << format_number(table.eps[k]);
    for (const auto& v : table.values) os << ' ' << (std::isnan(v[k]) ? std::string("nan") : format_number(v[k]));
    os << '\n';
  }
}

}  // namespace topoforge
