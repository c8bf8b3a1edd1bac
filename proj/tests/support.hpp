#pragma once

// Shared test helpers: random polynomials with exact term-wise derivatives
// (the independent oracle for the dual-number layer), tolerance helpers, and
// a two-trajectory Lyapunov estimator that never touches the variational
// machinery it is used to check.

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "varlag/dual.hpp"
#include "varlag/integrate.hpp"
#include "varlag/model.hpp"
#include "varlag/random.hpp"

namespace vtest {

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// --- polynomial oracle ---------------------------------------------------------

struct Poly {
  struct Term {
    double c;
    std::vector<int> e;  // exponent per variable
  };
  std::size_t nvars = 0;
  std::vector<Term> terms;

  template <class T>
  T operator()(std::span<const T> x) const {
    T acc{};
    for (const Term& t : terms) {
      T prod = T(t.c);
      for (std::size_t v = 0; v < nvars; ++v)
        if (t.e[v] > 0) prod = prod * varlag::ipow(x[v], t.e[v]);
      acc = acc + prod;
    }
    return acc;
  }

  /// Exact mixed partial by symbolic term-wise differentiation.
  double exact_partial(std::span<const double> x, std::span<const std::size_t> idx) const {
    double acc = 0.0;
    for (const Term& t : terms) {
      double c = t.c;
      std::vector<int> e = t.e;
      bool dead = false;
      for (std::size_t k : idx) {
        if (e[k] == 0) {
          dead = true;
          break;
        }
        c *= e[k];
        e[k] -= 1;
      }
      if (dead) continue;
      double prod = c;
      for (std::size_t v = 0; v < nvars; ++v) prod *= std::pow(x[v], e[v]);
      acc += prod;
    }
    return acc;
  }
};

inline Poly random_poly(std::mt19937_64& rng, std::size_t nvars, int max_degree = 4,
                        std::size_t nterms = 6) {
  Poly p;
  p.nvars = nvars;
  for (std::size_t k = 0; k < nterms; ++k) {
    Poly::Term t;
    t.c = varlag::uniform(rng, -2.0, 2.0);
    t.e.assign(nvars, 0);
    int budget = max_degree;
    for (std::size_t v = 0; v < nvars && budget > 0; ++v) {
      int d = static_cast<int>(rng() % static_cast<unsigned>(budget + 1));
      t.e[v] = d;
      budget -= d;
    }
    p.terms.push_back(std::move(t));
  }
  return p;
}

// --- independent chaos-rate estimator --------------------------------------------

/// Benettin-style largest-exponent estimate from two full nonlinear
/// trajectories with periodic rescaling; uses only the base system.
inline double two_trajectory_lyapunov(const varlag::LagrangianModel& model,
                                      std::span<const double> q0,
                                      std::span<const double> qd0, double d0,
                                      double renorm_interval, double t_total,
                                      const varlag::IntegratorSpec& integ) {
  const std::size_t n = model.dimension();
  std::vector<double> y(2 * n), yp(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = q0[i];
    y[n + i] = qd0[i];
  }
  yp = y;
  yp[0] += d0;  // initial offset along the first coordinate

  double log_sum = 0.0;
  double t = 0.0;
  while (t < t_total) {
    double seg = std::min(renorm_interval, t_total - t);
    varlag::IntegratorSpec s = integ;
    s.t0 = t;
    s.t1 = t + seg;
    auto leg = varlag::integrate_base(model, std::span<const double>(y).subspan(0, n),
                                      std::span<const double>(y).subspan(n, n), s, false);
    auto legp = varlag::integrate_base(model, std::span<const double>(yp).subspan(0, n),
                                       std::span<const double>(yp).subspan(n, n), s, false);
    y = leg.states.back();
    yp = legp.states.back();
    t += seg;
    double d = 0.0;
    for (std::size_t i = 0; i < 2 * n; ++i) d += (yp[i] - y[i]) * (yp[i] - y[i]);
    d = std::sqrt(d);
    log_sum += std::log(d / d0);
    for (std::size_t i = 0; i < 2 * n; ++i) yp[i] = y[i] + (d0 / d) * (yp[i] - y[i]);
  }
  return log_sum / t_total;
}

/// Least-squares slope of log(err) against log(delta).
inline double fitted_order(std::span<const double> deltas, std::span<const double> errs) {
  const std::size_t m = deltas.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double x = std::log(deltas[i]);
    double y = std::log(errs[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace vtest
