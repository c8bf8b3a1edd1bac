#pragma once

// Lyapunov spectrum estimation from the variational flow: n copies of the
// (eps, epsdot) block ride along one base trajectory, the bundle is
// re-orthonormalized at fixed intervals by classical Gram-Schmidt (with one
// re-orthogonalization pass), and the accumulated log norms divided by
// elapsed time give the exponents. The running estimates are kept for
// convergence inspection.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "varlag/integrate.hpp"
#include "varlag/model.hpp"
#include "varlag/prolongation.hpp"
#include "varlag/state.hpp"

namespace varlag {

struct LyapunovResult {
  std::vector<double> exponents;
  std::vector<double> times;                 // renormalization times
  std::vector<std::vector<double>> running;  // running[k][i]: estimate of exponent k at times[i]
  Termination termination = Termination::completed;
};

inline constexpr double kLyapunovOverflowGuard = 1e100;

/// Estimate the leading `n_exponents` Lyapunov exponents (n_exponents ≤ 2N).
/// The initial bundle is the canonical basis of the (eps, epsdot) space
/// restricted to the first n_exponents directions; `base` supplies (q, qdot)
/// and its eps block is ignored. The integrator spec's time span is ignored;
/// stepping control fields apply per renormalization segment.
inline LyapunovResult lyapunov_spectrum(const LagrangianModel& model,
                                        const ExtendedState& base, std::size_t n_exponents,
                                        double renorm_interval, double t_total,
                                        const IntegratorSpec& integ) {
  const std::size_t n = model.dimension();
  base.validate(n);
  if (n_exponents == 0 || n_exponents > 2 * n)
    throw std::invalid_argument("lyapunov_spectrum: need 1 <= n_exponents <= 2N");
  if (!(renorm_interval > 0.0))
    throw std::invalid_argument("lyapunov_spectrum: renorm_interval must be positive");
  if (!(t_total > 0.0)) throw std::invalid_argument("lyapunov_spectrum: t_total must be positive");

  const std::size_t k = n_exponents;
  const std::size_t block = 2 * n;

  // State layout: (q, qdot), then k blocks of (eps, epsdot).
  std::vector<double> y(2 * n + k * block, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = base.q[i];
    y[n + i] = base.qdot[i];
  }
  for (std::size_t v = 0; v < k; ++v) y[2 * n + v * block + v] = 1.0;

  auto rhs = [&model, n, k, block](double t, std::span<const double> yy,
                                   std::span<double> dy) {
    std::span<const double> q = yy.subspan(0, n);
    std::span<const double> qd = yy.subspan(n, n);
    std::vector<double> qdd = el_accel(model, q, qd, t);
    VariationalMatrices mats = variational_matrices(model, q, qd, qdd, t);
    for (std::size_t i = 0; i < n; ++i) {
      dy[i] = qd[i];
      dy[n + i] = qdd[i];
    }
    for (std::size_t v = 0; v < k; ++v) {
      std::span<const double> eps = yy.subspan(2 * n + v * block, n);
      std::span<const double> epsd = yy.subspan(2 * n + v * block + n, n);
      std::vector<double> epsdd = variational_accel(mats, eps, epsd);
      for (std::size_t i = 0; i < n; ++i) {
        dy[2 * n + v * block + i] = epsd[i];
        dy[2 * n + v * block + n + i] = epsdd[i];
      }
    }
  };

  LyapunovResult out;
  out.exponents.assign(k, 0.0);
  out.running.assign(k, {});
  std::vector<double> log_sums(k, 0.0);

  double t = 0.0;
  bool first_segment = true;
  while (t < t_total) {
    double seg = std::min(renorm_interval, t_total - t);
    IntegratorSpec s = integ;
    s.t0 = t;
    s.t1 = t + seg;
    RawTrajectory leg = integrate_raw(rhs, y, s, /*store=*/false);
    if (leg.termination != Termination::completed) {
      out.termination = leg.termination;
      return out;
    }
    y = leg.states.back();
    t += seg;

    for (double v : y)
      if (std::abs(v) > kLyapunovOverflowGuard)
        throw std::runtime_error(
            first_segment
                ? "lyapunov_spectrum: bundle overflow before first renormalization; "
                  "use a smaller renorm_interval"
                : "lyapunov_spectrum: bundle overflow; use a smaller renorm_interval");
    first_segment = false;

    // Classical Gram-Schmidt over the (eps, epsdot) vectors, one
    // re-orthogonalization pass.
    std::vector<std::vector<double>> basis(k);
    for (std::size_t v = 0; v < k; ++v) {
      std::vector<double> w(y.begin() + 2 * n + v * block,
                            y.begin() + 2 * n + (v + 1) * block);
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < v; ++j) {
          double proj = 0.0;
          for (std::size_t i = 0; i < block; ++i) proj += w[i] * basis[j][i];
          for (std::size_t i = 0; i < block; ++i) w[i] -= proj * basis[j][i];
        }
      }
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      if (!(norm > 0.0))
        throw std::runtime_error("lyapunov_spectrum: bundle collapsed during orthogonalization");
      for (double& x : w) x /= norm;
      basis[v] = w;
      log_sums[v] += std::log(norm);
    }
    for (std::size_t v = 0; v < k; ++v)
      for (std::size_t i = 0; i < block; ++i) y[2 * n + v * block + i] = basis[v][i];

    out.times.push_back(t);
    for (std::size_t v = 0; v < k; ++v) out.running[v].push_back(log_sums[v] / t);
  }

  for (std::size_t v = 0; v < k; ++v) out.exponents[v] = log_sums[v] / t_total;
  return out;
}

}  // namespace varlag
