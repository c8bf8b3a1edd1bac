#pragma once

// Exact partial derivatives of scalar multivariate functions up to third
// order, computed by seeding nested duals one direction per level, plus a
// central finite-difference estimator used as an independent cross-check.
//
// A callable F must be invocable as f(std::span<const T>) -> T for the dual
// depths a given operation needs (gradient: 1, hessian: 2, third_mixed: 3).

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "varlag/dual.hpp"
#include "varlag/linalg.hpp"

namespace varlag {

/// Raised when an evaluation produces NaN/Inf at any derivative level.
struct EvaluationError : std::runtime_error {
  std::string quantity;   // which output went non-finite
  std::size_t coordinate; // seeded coordinate involved (0 for plain values)
  EvaluationError(std::string what_quantity, std::size_t coord)
      : std::runtime_error("non-finite result while evaluating " + what_quantity +
                           " (coordinate " + std::to_string(coord) + ")"),
        quantity(std::move(what_quantity)),
        coordinate(coord) {}
};

namespace detail {

template <class T>
void require_finite(const T& v, const char* quantity, std::size_t coord) {
  if (!all_finite(v)) throw EvaluationError(quantity, coord);
}

}  // namespace detail

template <class F>
double eval_value(F&& f, std::span<const double> x) {
  double v = f(x);
  detail::require_finite(v, "function value", 0);
  return v;
}

/// First partials at x, exact to machine precision.
template <class F>
std::vector<double> gradient(F&& f, std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<Dual1> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = Dual1{x[i], 0.0};
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i].dot = 1.0;
    Dual1 r = f(std::span<const Dual1>(xs));
    xs[i].dot = 0.0;
    detail::require_finite(r, "gradient", i);
    g[i] = r.dot;
  }
  return g;
}

template <class F>
double second_partial(F&& f, std::span<const double> x, std::size_t i, std::size_t j) {
  const std::size_t n = x.size();
  std::vector<Dual2> xs(n);
  for (std::size_t k = 0; k < n; ++k) xs[k] = Dual2{Dual1{x[k], 0.0}, Dual1{0.0, 0.0}};
  xs[i].val.dot = 1.0;
  xs[j].dot.val = 1.0;
  Dual2 r = f(std::span<const Dual2>(xs));
  detail::require_finite(r, "second partial", i);
  return r.dot.dot;
}

/// Matrix of second partials, symmetrized as (H + Hᵀ)/2.
template <class F>
Matd hessian(F&& f, std::span<const double> x) {
  const std::size_t n = x.size();
  Matd h(n, n);
  std::vector<Dual2> xs(n);
  for (std::size_t k = 0; k < n; ++k) xs[k] = Dual2{Dual1{x[k], 0.0}, Dual1{0.0, 0.0}};
  for (std::size_t i = 0; i < n; ++i) {
    xs[i].val.dot = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      xs[j].dot.val = 1.0;
      Dual2 r = f(std::span<const Dual2>(xs));
      xs[j].dot.val = 0.0;
      detail::require_finite(r, "hessian entry", i);
      h(i, j) = r.dot.dot;
    }
    xs[i].val.dot = 0.0;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      double s = 0.5 * (h(i, j) + h(j, i));
      h(i, j) = s;
      h(j, i) = s;
    }
  return h;
}

/// ∂³f/∂xᵢ∂xⱼ∂x_k, invariant under permutations of (i, j, k).
template <class F>
double third_mixed(F&& f, std::span<const double> x, std::size_t i, std::size_t j,
                   std::size_t k) {
  const std::size_t n = x.size();
  std::vector<Dual3> xs(n);
  for (std::size_t c = 0; c < n; ++c) xs[c].val.val.val = x[c];
  xs[i].val.val.dot = 1.0;
  xs[j].val.dot.val = 1.0;
  xs[k].dot.val.val = 1.0;
  Dual3 r = f(std::span<const Dual3>(xs));
  detail::require_finite(r, "third partial", i);
  return r.dot.dot.dot;
}

// --- finite-difference oracle -----------------------------------------------

/// Central finite-difference estimate of a mixed partial; truncation error is
/// O(step²) at every order. Used only as an independent cross-check of the
/// dual-number results.
struct FdEstimate {
  double value = 0.0;
  bool cancellation_warning = false;  // step small enough that rounding dominates
};

namespace detail {

template <class F>
double fd_recurse(F&& f, std::vector<double>& x, std::span<const std::size_t> idx,
                  std::span<const double> steps) {
  if (idx.empty()) return f(std::span<const double>(x));
  const std::size_t i = idx.front();
  const double h = steps.front();
  x[i] += h;
  double plus = fd_recurse(f, x, idx.subspan(1), steps.subspan(1));
  x[i] -= 2.0 * h;
  double minus = fd_recurse(f, x, idx.subspan(1), steps.subspan(1));
  x[i] += h;
  return (plus - minus) / (2.0 * h);
}

}  // namespace detail

/// multi_index lists the differentiation coordinates (repeats allowed),
/// order = multi_index.size() ≤ 3. step = 0 selects the default relative
/// step per order: 1e-5, 1e-4, 1e-3 (near the eps^(1/(order+2)) balance
/// between O(step²) truncation and eps/step^order rounding).
template <class F>
FdEstimate fd_partial(F&& f, std::span<const double> x,
                      std::span<const std::size_t> multi_index, double step = 0.0) {
  const std::size_t order = multi_index.size();
  if (order == 0 || order > 3) throw std::invalid_argument("fd_partial: order must be 1..3");
  for (std::size_t i : multi_index)
    if (i >= x.size()) throw std::invalid_argument("fd_partial: index out of range");

  FdEstimate out;
  std::vector<double> steps(order);
  static constexpr double kDefaultRel[3] = {1e-5, 1e-4, 1e-3};
  const double base_rel = kDefaultRel[order - 1];
  for (std::size_t k = 0; k < order; ++k) {
    double scale = std::max(1.0, std::abs(x[multi_index[k]]));
    steps[k] = (step > 0.0) ? step : base_rel * scale;
    // Below these relative steps, rounding error ~ eps/h^order outgrows the
    // O(h²) truncation term in double precision.
    static constexpr double kWarn[3] = {1e-8, 1e-5, 1e-4};
    if (steps[k] / scale < kWarn[order - 1]) out.cancellation_warning = true;
  }
  std::vector<double> xw(x.begin(), x.end());
  out.value = detail::fd_recurse(f, xw, multi_index, steps);
  return out;
}

}  // namespace varlag
