#pragma once

// Central-difference cross-check of AD derivatives of state callbacks.

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <vector>

#include "generators.hpp"
#include "topoforge/autodiff.hpp"

namespace fdcheck {

using namespace topoforge;

// Central difference of f at `at` along (dy1, dy2); output flattened.
template <class F>
std::vector<double> central_difference(const F& f, const StatePoint& at, const Vec2<double>& dy1,
                                       const Mat2<double>& dy2, double h) {
  StatePoint plus = at, minus = at;
  for (int i = 0; i < 2; ++i) {
    plus.y1[i] += h * dy1[i];
    minus.y1[i] -= h * dy1[i];
  }
  for (std::size_t i = 0; i < 4; ++i) {
    plus.y2.a[i] += h * dy2.a[i];
    minus.y2.a[i] -= h * dy2.a[i];
  }
  const auto fp = f(plus.x, plus.y1, plus.y2);
  const auto fm = f(minus.x, minus.y1, minus.y2);
  std::vector<double> out;
  if constexpr (std::is_same_v<std::remove_cvref_t<decltype(fp)>, double>) {
    out.push_back((fp - fm) / (2 * h));
  } else if constexpr (std::is_same_v<std::remove_cvref_t<decltype(fp)>, Vec2<double>>) {
    for (int i = 0; i < 2; ++i) out.push_back((fp[i] - fm[i]) / (2 * h));
  } else {
    for (std::size_t i = 0; i < 4; ++i) out.push_back((fp.a[i] - fm.a[i]) / (2 * h));
  }
  return out;
}

inline std::vector<double> flatten(double v) { return {v}; }
inline std::vector<double> flatten(const Vec2<double>& v) { return {v[0], v[1]}; }
inline std::vector<double> flatten(const Mat2<double>& v) { return {v.a[0], v.a[1], v.a[2], v.a[3]}; }

template <class F>
double worst_fd_mismatch(const F& f, int m, gen::Source& src, double scale) {
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const StatePoint at = src.state(src.point(-1, 1), m, scale);
    const StatePoint dir = src.state({}, m, 1.0);
    const auto ad = flatten(derivative_along(f, at, dir.y1, dir.y2));
    const double h = 1e-6 * (1.0 + scale);
    const auto fd = central_difference(f, at, dir.y1, dir.y2, h);
    for (std::size_t i = 0; i < ad.size(); ++i)
      worst = std::max(worst, std::abs(ad[i] - fd[i]) / (1.0 + std::abs(ad[i])));
  }
  return worst;
}

}  // namespace fdcheck
