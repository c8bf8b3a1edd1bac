#pragma once

// Nested first-order dual numbers for forward-mode differentiation.
//
// Dual<double> carries a value and one directional derivative. Nesting the
// template (Dual<Dual<double>>, ...) exposes mixed partials of the
// corresponding order: each level contributes one seeded direction, and the
// innermost-to-outermost tangent chain holds the mixed derivative.
//
// Extension point for new elementary functions: define the lifted overload
// following the chain-rule pattern used by sin/exp below, e.g.
//
//   template <class T>
//   Dual<T> tan(const Dual<T>& x) {
//     auto c = cos(x.val);
//     return {tan(x.val), x.dot / (c * c)};
//   }
//
// The recursion through T makes the new function available at every nesting
// depth at once.

#include <cmath>
#include <type_traits>
#include <utility>

namespace varlag {

using std::cos;
using std::exp;
using std::log;
using std::pow;
using std::sin;
using std::sqrt;

template <class T>
struct Dual {
  T val{};  // value
  T dot{};  // tangent along the direction seeded at this level

  constexpr Dual() = default;
  constexpr Dual(const T& v) : val(v), dot{} {}
  constexpr Dual(T v, T d) : val(std::move(v)), dot(std::move(d)) {}

  // Constants lift with zero tangent at every level.
  template <class U = T, class = std::enable_if_t<!std::is_same_v<U, double>>>
  constexpr Dual(double v) : val(v), dot{} {}

  Dual& operator+=(const Dual& o) { *this = *this + o; return *this; }
  Dual& operator-=(const Dual& o) { *this = *this - o; return *this; }
  Dual& operator*=(const Dual& o) { *this = *this * o; return *this; }
  Dual& operator/=(const Dual& o) { *this = *this / o; return *this; }
};

using Dual1 = Dual<double>;
using Dual2 = Dual<Dual1>;
using Dual3 = Dual<Dual2>;
using Dual4 = Dual<Dual3>;

template <class T>
struct dual_depth : std::integral_constant<int, 0> {};
template <class T>
struct dual_depth<Dual<T>> : std::integral_constant<int, dual_depth<T>::value + 1> {};
template <class T>
inline constexpr int dual_depth_v = dual_depth<T>::value;

// --- arithmetic -------------------------------------------------------------

template <class T>
constexpr Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  return {a.val + b.val, a.dot + b.dot};
}
template <class T>
constexpr Dual<T> operator+(const Dual<T>& a, double b) {
  return {a.val + b, a.dot};
}
template <class T>
constexpr Dual<T> operator+(double a, const Dual<T>& b) {
  return {a + b.val, b.dot};
}

template <class T>
constexpr Dual<T> operator-(const Dual<T>& a) {
  return {-a.val, -a.dot};
}
template <class T>
constexpr Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  return {a.val - b.val, a.dot - b.dot};
}
template <class T>
constexpr Dual<T> operator-(const Dual<T>& a, double b) {
  return {a.val - b, a.dot};
}
template <class T>
constexpr Dual<T> operator-(double a, const Dual<T>& b) {
  return {a - b.val, -b.dot};
}

template <class T>
constexpr Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.val * b.val, a.dot * b.val + a.val * b.dot};
}
template <class T>
constexpr Dual<T> operator*(const Dual<T>& a, double b) {
  return {a.val * b, a.dot * b};
}
template <class T>
constexpr Dual<T> operator*(double a, const Dual<T>& b) {
  return {a * b.val, a * b.dot};
}

template <class T>
constexpr Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  T q = a.val / b.val;
  return {q, (a.dot - q * b.dot) / b.val};
}
template <class T>
constexpr Dual<T> operator/(const Dual<T>& a, double b) {
  return {a.val / b, a.dot / b};
}
template <class T>
constexpr Dual<T> operator/(double a, const Dual<T>& b) {
  T q = a / b.val;
  return {q, (-q * b.dot) / b.val};
}

// --- elementary functions ---------------------------------------------------

template <class T>
Dual<T> sin(const Dual<T>& x) {
  return {sin(x.val), x.dot * cos(x.val)};
}
template <class T>
Dual<T> cos(const Dual<T>& x) {
  return {cos(x.val), -x.dot * sin(x.val)};
}
template <class T>
Dual<T> exp(const Dual<T>& x) {
  T e = exp(x.val);
  return {e, x.dot * e};
}
template <class T>
Dual<T> log(const Dual<T>& x) {
  return {log(x.val), x.dot / x.val};
}
template <class T>
Dual<T> sqrt(const Dual<T>& x) {
  T s = sqrt(x.val);
  return {s, x.dot / (2.0 * s)};
}
template <class T>
Dual<T> pow(const Dual<T>& x, double p) {
  return {pow(x.val, p), x.dot * (p * pow(x.val, p - 1.0))};
}

// Integer powers by repeated multiplication, exact for polynomial work.
template <class T>
constexpr T ipow(const T& x, int n) {
  if (n < 0) return 1.0 / ipow(x, -n);
  T r = 1.0;
  T base = x;
  int k = n;
  while (k > 0) {
    if (k & 1) r = r * base;
    base = base * base;
    k >>= 1;
  }
  return r;
}
template <class T>
constexpr Dual<T> pow(const Dual<T>& x, int n) {
  return ipow(x, n);
}

// --- extraction helpers -----------------------------------------------------

/// Innermost value component, recursively.
constexpr double primal(double x) { return x; }
template <class T>
constexpr double primal(const Dual<T>& x) {
  return primal(x.val);
}

inline bool all_finite(double x) { return std::isfinite(x); }
template <class T>
bool all_finite(const Dual<T>& x) {
  return all_finite(x.val) && all_finite(x.dot);
}

}  // namespace varlag
