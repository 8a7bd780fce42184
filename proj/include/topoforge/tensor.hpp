#pragma once

// Fixed-size 2-vectors and 2x2 matrices over a generic scalar.
// State values live in Vec2 (unused second entry is zero when m = 1),
// state gradients in Mat2 with row = component, column = spatial direction.

#include <array>
#include <cmath>

namespace topoforge {

template <class T>
struct Vec2 {
  std::array<T, 2> v{};

  constexpr T& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
  constexpr const T& operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
};

template <class T>
struct Mat2 {
  std::array<T, 4> a{};

  constexpr T& operator()(int i, int k) { return a[static_cast<std::size_t>(2 * i + k)]; }
  constexpr const T& operator()(int i, int k) const { return a[static_cast<std::size_t>(2 * i + k)]; }

  static constexpr Mat2 identity() {
    Mat2 m;
    m(0, 0) = T(1);
    m(1, 1) = T(1);
    return m;
  }
};

using Point = Vec2<double>;

template <class T>
constexpr Vec2<T> make_vec(T x, T y) {
  Vec2<T> r;
  r[0] = x;
  r[1] = y;
  return r;
}

inline constexpr Point make_point(double x, double y) { return make_vec<double>(x, y); }

template <class T>
constexpr Mat2<T> make_mat(T a00, T a01, T a10, T a11) {
  Mat2<T> m;
  m(0, 0) = a00;
  m(0, 1) = a01;
  m(1, 0) = a10;
  m(1, 1) = a11;
  return m;
}

template <class T>
constexpr Vec2<T> operator+(const Vec2<T>& a, const Vec2<T>& b) { return make_vec<T>(a[0] + b[0], a[1] + b[1]); }
template <class T>
constexpr Vec2<T> operator-(const Vec2<T>& a, const Vec2<T>& b) { return make_vec<T>(a[0] - b[0], a[1] - b[1]); }
template <class T>
constexpr Vec2<T> operator-(const Vec2<T>& a) { return make_vec<T>(-a[0], -a[1]); }
template <class T, class S>
constexpr Vec2<T> operator*(const S& s, const Vec2<T>& a) { return make_vec<T>(s * a[0], s * a[1]); }
template <class T>
constexpr Vec2<T>& operator+=(Vec2<T>& a, const Vec2<T>& b) { a[0] += b[0]; a[1] += b[1]; return a; }
template <class T>
constexpr Vec2<T>& operator-=(Vec2<T>& a, const Vec2<T>& b) { a[0] -= b[0]; a[1] -= b[1]; return a; }

template <class T>
constexpr Mat2<T> operator+(const Mat2<T>& a, const Mat2<T>& b) {
  Mat2<T> r;
  for (int i = 0; i < 4; ++i) r.a[i] = a.a[i] + b.a[i];
  return r;
}
template <class T>
constexpr Mat2<T> operator-(const Mat2<T>& a, const Mat2<T>& b) {
  Mat2<T> r;
  for (int i = 0; i < 4; ++i) r.a[i] = a.a[i] - b.a[i];
  return r;
}
template <class T>
constexpr Mat2<T> operator-(const Mat2<T>& a) {
  Mat2<T> r;
  for (int i = 0; i < 4; ++i) r.a[i] = -a.a[i];
  return r;
}
template <class T, class S>
constexpr Mat2<T> operator*(const S& s, const Mat2<T>& a) {
  Mat2<T> r;
  for (int i = 0; i < 4; ++i) r.a[i] = s * a.a[i];
  return r;
}
template <class T>
constexpr Mat2<T>& operator+=(Mat2<T>& a, const Mat2<T>& b) {
  for (int i = 0; i < 4; ++i) a.a[i] += b.a[i];
  return a;
}
template <class T>
constexpr Mat2<T>& operator-=(Mat2<T>& a, const Mat2<T>& b) {
  for (int i = 0; i < 4; ++i) a.a[i] -= b.a[i];
  return a;
}

template <class T>
constexpr Mat2<T> operator*(const Mat2<T>& a, const Mat2<T>& b) {
  Mat2<T> r;
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) r(i, k) = a(i, 0) * b(0, k) + a(i, 1) * b(1, k);
  return r;
}

template <class T>
constexpr Vec2<T> operator*(const Mat2<T>& a, const Vec2<T>& x) {
  return make_vec<T>(a(0, 0) * x[0] + a(0, 1) * x[1], a(1, 0) * x[0] + a(1, 1) * x[1]);
}

template <class T>
constexpr Mat2<T> transpose(const Mat2<T>& a) { return make_mat<T>(a(0, 0), a(1, 0), a(0, 1), a(1, 1)); }

template <class T>
constexpr T trace(const Mat2<T>& a) { return a(0, 0) + a(1, 1); }

template <class T, class U>
constexpr auto dot(const Vec2<T>& a, const Vec2<U>& b) { return a[0] * b[0] + a[1] * b[1]; }

// Frobenius contraction A:B.
template <class T, class U>
constexpr auto contract(const Mat2<T>& a, const Mat2<U>& b) {
  return a.a[0] * b.a[0] + a.a[1] * b.a[1] + a.a[2] * b.a[2] + a.a[3] * b.a[3];
}

inline double norm(const Point& p) { return std::hypot(p[0], p[1]); }
inline double distance(const Point& a, const Point& b) { return norm(a - b); }
inline double frobenius_norm(const Mat2<double>& a) { return std::sqrt(contract(a, a)); }

template <class T, class S>
constexpr Vec2<T> cast_vec(const Vec2<S>& a) { return make_vec<T>(T(a[0]), T(a[1])); }
template <class T, class S>
constexpr Mat2<T> cast_mat(const Mat2<S>& a) {
  Mat2<T> r;
  for (int i = 0; i < 4; ++i) r.a[i] = T(a.a[i]);
  return r;
}

}  // namespace topoforge
