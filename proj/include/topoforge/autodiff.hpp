#pragma once

// Forward-mode dual numbers with one tangent component, and helpers that
// differentiate state callbacks f(x, y1, y2) along the state value y1 and
// the state gradient y2.

#include <cmath>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "topoforge/error.hpp"
#include "topoforge/tensor.hpp"

namespace topoforge {

struct Dual {
  double value = 0.0;
  double deriv = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double v) : value(v) {}  // NOLINT: constants promote implicitly
  constexpr Dual(double v, double d) : value(v), deriv(d) {}

  constexpr Dual& operator+=(const Dual& o) { value += o.value; deriv += o.deriv; return *this; }
  constexpr Dual& operator-=(const Dual& o) { value -= o.value; deriv -= o.deriv; return *this; }
  constexpr Dual& operator*=(const Dual& o) {
    deriv = deriv * o.value + value * o.deriv;
    value *= o.value;
    return *this;
  }
  constexpr Dual& operator/=(const Dual& o) {
    deriv = (deriv * o.value - value * o.deriv) / (o.value * o.value);
    value /= o.value;
    return *this;
  }
};

constexpr Dual operator+(Dual a, const Dual& b) { return a += b; }
constexpr Dual operator-(Dual a, const Dual& b) { return a -= b; }
constexpr Dual operator*(Dual a, const Dual& b) { return a *= b; }
constexpr Dual operator/(Dual a, const Dual& b) { return a /= b; }
constexpr Dual operator+(Dual a, double b) { a.value += b; return a; }
constexpr Dual operator+(double a, Dual b) { b.value += a; return b; }
constexpr Dual operator-(Dual a, double b) { a.value -= b; return a; }
constexpr Dual operator-(double a, const Dual& b) { return {a - b.value, -b.deriv}; }
constexpr Dual operator*(const Dual& a, double b) { return {a.value * b, a.deriv * b}; }
constexpr Dual operator*(double a, const Dual& b) { return {a * b.value, a * b.deriv}; }
constexpr Dual operator/(const Dual& a, double b) { return {a.value / b, a.deriv / b}; }
constexpr Dual operator/(double a, const Dual& b) { return {a / b.value, -a * b.deriv / (b.value * b.value)}; }
constexpr Dual operator-(const Dual& a) { return {-a.value, -a.deriv}; }

constexpr bool operator<(const Dual& a, const Dual& b) { return a.value < b.value; }
constexpr bool operator>(const Dual& a, const Dual& b) { return a.value > b.value; }

inline Dual exp(const Dual& a) {
  const double e = std::exp(a.value);
  return {e, e * a.deriv};
}

inline Dual log(const Dual& a) { return {std::log(a.value), a.deriv / a.value}; }

inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.value);
  return {s, a.deriv / (2.0 * s)};
}

// Integer powers stay exact at zero base (no log involved).
inline Dual pow(const Dual& a, int n) {
  if (n == 0) return {1.0, 0.0};
  const double lower = std::pow(a.value, n - 1);
  return {lower * a.value, n * lower * a.deriv};
}

inline Dual pow(const Dual& a, double p) {
  const double lower = std::pow(a.value, p - 1.0);
  return {lower * a.value, p * lower * a.deriv};
}

using std::exp;
using std::log;
using std::pow;
using std::sqrt;

inline double value_of(double a) { return a; }
inline double value_of(const Dual& a) { return a.value; }
inline double deriv_of(double) { return 0.0; }
inline double deriv_of(const Dual& a) { return a.deriv; }

template <class T>
inline constexpr bool is_dual_v = std::is_same_v<std::remove_cvref_t<T>, Dual>;

// Unit tangent of the state space R^m x R^{m x d}; indices are zero based.
class TangentDirection {
 public:
  enum class Kind { state_value, state_gradient };

  static TangentDirection value(int component) { return {Kind::state_value, component, 0}; }
  static TangentDirection gradient(int component, int direction) {
    return {Kind::state_gradient, component, direction};
  }

  Kind kind() const { return kind_; }
  int component() const { return component_; }
  int direction() const { return direction_; }

  // Throws std::out_of_range when the indices exceed (m, d).
  void validate(int m, int d) const;

  // Column of this direction in full_jacobian: values first, then gradients row-major.
  int flat_index(int m, int d) const {
    return kind_ == Kind::state_value ? component_ : m + component_ * d + direction_;
  }

 private:
  TangentDirection(Kind kind, int component, int direction)
      : kind_(kind), component_(component), direction_(direction) {}

  Kind kind_;
  int component_;
  int direction_;
};

// Evaluation point of a state callback.
struct StatePoint {
  Point x{};
  Vec2<double> y1{};
  Mat2<double> y2{};
};

namespace detail {

inline bool finite(double a) { return std::isfinite(a); }

template <class Out>
struct OutputTraits;

template <>
struct OutputTraits<Dual> {
  static constexpr int size = 1;
  static double value(const Dual& o, int) { return o.value; }
  static double deriv(const Dual& o, int) { return o.deriv; }
};
template <>
struct OutputTraits<Vec2<Dual>> {
  static constexpr int size = 2;
  static double value(const Vec2<Dual>& o, int i) { return o[i].value; }
  static double deriv(const Vec2<Dual>& o, int i) { return o[i].deriv; }
};
template <>
struct OutputTraits<Mat2<Dual>> {
  static constexpr int size = 4;
  static double value(const Mat2<Dual>& o, int i) { return o.a[static_cast<std::size_t>(i)].value; }
  static double deriv(const Mat2<Dual>& o, int i) { return o.a[static_cast<std::size_t>(i)].deriv; }
};

template <class Out>
struct RealOf;
template <>
struct RealOf<Dual> { using type = double; };
template <>
struct RealOf<Vec2<Dual>> { using type = Vec2<double>; };
template <>
struct RealOf<Mat2<Dual>> { using type = Mat2<double>; };

template <class Out>
typename RealOf<Out>::type derivative_part(const Out& o) {
  if constexpr (std::is_same_v<Out, Dual>) {
    return o.deriv;
  } else if constexpr (std::is_same_v<Out, Vec2<Dual>>) {
    return make_vec(o[0].deriv, o[1].deriv);
  } else {
    Mat2<double> r;
    for (int i = 0; i < 4; ++i) r.a[static_cast<std::size_t>(i)] = o.a[static_cast<std::size_t>(i)].deriv;
    return r;
  }
}

template <class Out>
void check_finite(const Out& o, const Point& x) {
  using Tr = OutputTraits<Out>;
  for (int i = 0; i < Tr::size; ++i)
    if (!finite(Tr::value(o, i)) || !finite(Tr::deriv(o, i)))
      throw EvaluationError("non-finite callback output", x);
}

}  // namespace detail

// Derivative of f at `at` along the arbitrary state tangent (dy1, dy2).
template <class F>
auto derivative_along(const F& f, const StatePoint& at, const Vec2<double>& dy1, const Mat2<double>& dy2) {
  Vec2<Dual> y1;
  Mat2<Dual> y2;
  for (int i = 0; i < 2; ++i) y1[i] = Dual(at.y1[i], dy1[i]);
  for (int i = 0; i < 4; ++i) y2.a[static_cast<std::size_t>(i)] = Dual(at.y2.a[static_cast<std::size_t>(i)], dy2.a[static_cast<std::size_t>(i)]);
  const auto out = f(at.x, y1, y2);
  detail::check_finite(out, at.x);
  return detail::derivative_part(out);
}

inline void tangent_components(const TangentDirection& dir, Vec2<double>& dy1, Mat2<double>& dy2) {
  dy1 = {};
  dy2 = {};
  if (dir.kind() == TangentDirection::Kind::state_value)
    dy1[dir.component()] = 1.0;
  else
    dy2(dir.component(), dir.direction()) = 1.0;
}

template <class F>
auto directional_derivative(const F& f, const StatePoint& at, const TangentDirection& dir, int m = 2, int d = 2) {
  dir.validate(m, d);
  Vec2<double> dy1;
  Mat2<double> dy2;
  tangent_components(dir, dy1, dy2);
  return derivative_along(f, at, dy1, dy2);
}

// Rows: output components (scalar 1, vector m, matrix m*d row-major);
// columns: the m + m*d unit tangents in TangentDirection::flat_index order.
template <class F>
Eigen::MatrixXd full_jacobian(const F& f, const StatePoint& at, int m, int d = 2) {
  std::vector<TangentDirection> dirs;
  for (int i = 0; i < m; ++i) dirs.push_back(TangentDirection::value(i));
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < d; ++k) dirs.push_back(TangentDirection::gradient(i, k));

  Eigen::MatrixXd jac;
  for (std::size_t c = 0; c < dirs.size(); ++c) {
    const auto col = directional_derivative(f, at, dirs[c], m, d);
    using Col = std::remove_cvref_t<decltype(col)>;
    if constexpr (std::is_same_v<Col, double>) {
      if (jac.size() == 0) jac.resize(1, static_cast<Eigen::Index>(dirs.size()));
      jac(0, static_cast<Eigen::Index>(c)) = col;
    } else if constexpr (std::is_same_v<Col, Vec2<double>>) {
      if (jac.size() == 0) jac.resize(m, static_cast<Eigen::Index>(dirs.size()));
      for (int i = 0; i < m; ++i) jac(i, static_cast<Eigen::Index>(c)) = col[i];
    } else {
      if (jac.size() == 0) jac.resize(m * d, static_cast<Eigen::Index>(dirs.size()));
      for (int i = 0; i < m; ++i)
        for (int k = 0; k < d; ++k) jac(i * d + k, static_cast<Eigen::Index>(c)) = col(i, k);
    }
  }
  return jac;
}

}  // namespace topoforge
