#pragma once

// Problem data: per-side coefficients A1, A2, loads F1, F2, cost densities j,
// boundary cost j_bnd, Neumann data, geometry, and the built-in examples.

#include <functional>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "topoforge/autodiff.hpp"
#include "topoforge/geometry.hpp"
#include "topoforge/mesh.hpp"
#include "topoforge/tensor.hpp"

namespace topoforge {

template <class T>
using Scalar = T;

// Callback of (x, y1, y2) usable with both double and Dual state arguments.
// Built from a generic lambda taking (Point, const auto& y1, const auto& y2).
template <template <class> class Out>
class StateFunction {
 public:
  using RealSig = Out<double>(Point, const Vec2<double>&, const Mat2<double>&);
  using DualSig = Out<Dual>(Point, const Vec2<Dual>&, const Mat2<Dual>&);

  StateFunction() = default;
  template <class F>
    requires(!std::is_same_v<std::remove_cvref_t<F>, StateFunction>)
  StateFunction(F f) : real_(f), dual_(std::move(f)) {}  // NOLINT: implicit from lambdas

  Out<double> operator()(Point x, const Vec2<double>& y1, const Mat2<double>& y2) const { return real_(x, y1, y2); }
  Out<Dual> operator()(Point x, const Vec2<Dual>& y1, const Mat2<Dual>& y2) const { return dual_(x, y1, y2); }
  explicit operator bool() const { return static_cast<bool>(real_); }

 private:
  std::function<RealSig> real_;
  std::function<DualSig> dual_;
};

using VectorCoefficient = StateFunction<Vec2>;
using MatrixCoefficient = StateFunction<Mat2>;
using ScalarDensity = StateFunction<Scalar>;

// Scalar type of a state argument (double or Dual).
template <class V>
using scalar_of = std::remove_cvref_t<decltype(std::declval<V>()[0])>;

// Data on one side of the interface (inside Omega or outside).
struct Material {
  VectorCoefficient A1;
  MatrixCoefficient A2;
  std::function<Vec2<double>(Point)> F1;
  std::function<Mat2<double>(Point)> F2;
  ScalarDensity j;
};

struct ProblemSpec {
  std::string name;
  int components = 1;
  Material inside;
  Material outside;
  ScalarDensity j_boundary;                  // integrated over Neumann edges
  std::function<Vec2<double>(Point)> neumann;  // g_N
  DomainGeometry geometry;

  // Solver defaults stated with the example.
  int load_steps = 1;
  double corrector_damping = 1.0;
  Point default_z{};
  std::vector<std::string> default_shapes;

  std::map<std::string, double> parameters;  // every scalar the example was built from

  const Material& material(Region r) const { return r == Region::inside ? inside : outside; }
  bool in_omega(Point p) const { return geometry.in_omega(p); }
};

// example1, example2, example4, example5. Overrides replace named scalars of
// `parameters`; unknown names throw std::invalid_argument.
ProblemSpec build_example(const std::string& name, const std::map<std::string, double>& overrides = {});
const std::vector<std::string>& example_names();
// Parameter names and defaults accepted by build_example for `name`.
std::map<std::string, double> example_parameters(const std::string& name);

struct LameParameters {
  double mu = 0.0;
  double lambda = 0.0;
};

// Throws std::invalid_argument unless E > 0 and 0 <= nu < 1/2.
LameParameters lame_from_engineering(double E, double nu);

// First Piola stress of a St. Venant-Kirchhoff material.
template <class T>
Mat2<T> stvk_stress(const Mat2<T>& Du, double mu, double lambda) {
  const Mat2<T> F = Mat2<T>::identity() + Du;
  const Mat2<T> green = T(0.5) * (transpose(F) * F - Mat2<T>::identity());
  const Mat2<T> second = (lambda * trace(green)) * Mat2<T>::identity() + (2.0 * mu) * green;
  return F * second;
}

template <class T>
Mat2<T> linear_stress(const Mat2<T>& Du, double mu, double lambda) {
  const Mat2<T> strain = T(0.5) * (Du + transpose(Du));
  return (lambda * trace(strain)) * Mat2<T>::identity() + (2.0 * mu) * strain;
}

// Example-2 reluctivity as a function of s = |grad u|, written through s^2.
template <class T>
T reluctivity(const T& s_squared, double nu0) {
  using std::exp;
  return nu0 - (nu0 - 200.0) * exp(-(s_squared * s_squared * s_squared) / 1000.0);
}

// Example-1 closed-form topological derivative for the unit disk.
struct ClosedFormInputs {
  double u = 0.0;
  Vec2<double> grad_u{};
  double p = 0.0;
  Vec2<double> grad_p{};
};
double example1_closed_form(const ProblemSpec& spec, const ClosedFormInputs& at);
// The same expression without the 2 beta2 / (beta1 + beta2) factor on the convection term.
double example1_closed_form_without_convection_factor(const ProblemSpec& spec, const ClosedFormInputs& at);

}  // namespace topoforge
