#pragma once

// Integration of the 4N-dimensional first-order extended system
// (q, qdot, eps, epsdot). The variational block is advanced simultaneously
// with the base trajectory in one combined right-hand side, so the
// coefficient matrices are always evaluated at the exact current state and
// never interpolated from a stored trajectory.
//
// Two methods: classical fixed-step RK4, and RKF45 with the standard
// embedded-pair error control (per-step error ≤ abs_tol + rel_tol·‖state‖,
// safety factor 0.9, exponent 1/5, growth clamped to [0.2, 5.0]). Dense
// output is cubic Hermite between accepted steps. Integration is strictly
// sequential and deterministic: identical inputs give bit-identical
// trajectories.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "varlag/model.hpp"
#include "varlag/prolongation.hpp"
#include "varlag/state.hpp"

namespace varlag {

enum class Method { rk4_fixed, rkf45_adaptive };
enum class Termination { completed, degenerate_m, step_underflow };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::degenerate_m: return "degenerate_M";
    case Termination::step_underflow: return "step_underflow";
  }
  return "unknown";
}

struct IntegratorSpec {
  Method method = Method::rkf45_adaptive;
  double t0 = 0.0;
  double t1 = 1.0;
  double step = 1e-3;  // rk4_fixed only
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double max_step = 0.1;
  double min_step = 1e-12;

  void validate() const {
    if (!(t1 > t0)) throw std::invalid_argument("integrator: t1 must exceed t0");
    if (method == Method::rk4_fixed) {
      if (!(step > 0.0)) throw std::invalid_argument("integrator: step must be positive");
    } else {
      if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
        throw std::invalid_argument("integrator: tolerances must be positive");
      if (!(min_step > 0.0) || !(min_step < max_step))
        throw std::invalid_argument("integrator: need 0 < min_step < max_step");
    }
  }
};

/// Sampled solution of a generic first-order system, with stored derivatives
/// for cubic Hermite dense output (O(h^4) interpolation error, consistent
/// with the carrier methods).
struct RawTrajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> derivs;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  Termination termination = Termination::completed;

  std::vector<double> sample_at(double t) const {
    if (times.empty()) throw std::out_of_range("trajectory is empty");
    if (t <= times.front()) return states.front();
    if (t >= times.back()) return states.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - times.begin());
    std::size_t lo = hi - 1;
    double h = times[hi] - times[lo];
    double s = (t - times[lo]) / h;
    double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    double h10 = s * (1.0 - s) * (1.0 - s);
    double h01 = s * s * (3.0 - 2.0 * s);
    double h11 = s * s * (s - 1.0);
    std::vector<double> y(states[lo].size());
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = h00 * states[lo][i] + h * h10 * derivs[lo][i] + h01 * states[hi][i] +
             h * h11 * derivs[hi][i];
    return y;
  }
};

namespace detail {

// Fehlberg 4(5) tableau.
inline constexpr double kA21 = 1.0 / 4.0;
inline constexpr double kA31 = 3.0 / 32.0, kA32 = 9.0 / 32.0;
inline constexpr double kA41 = 1932.0 / 2197.0, kA42 = -7200.0 / 2197.0,
                        kA43 = 7296.0 / 2197.0;
inline constexpr double kA51 = 439.0 / 216.0, kA52 = -8.0, kA53 = 3680.0 / 513.0,
                        kA54 = -845.0 / 4104.0;
inline constexpr double kA61 = -8.0 / 27.0, kA62 = 2.0, kA63 = -3544.0 / 2565.0,
                        kA64 = 1859.0 / 4104.0, kA65 = -11.0 / 40.0;
inline constexpr double kC2 = 1.0 / 4.0, kC3 = 3.0 / 8.0, kC4 = 12.0 / 13.0, kC5 = 1.0,
                        kC6 = 1.0 / 2.0;
inline constexpr double kB5_1 = 16.0 / 135.0, kB5_3 = 6656.0 / 12825.0,
                        kB5_4 = 28561.0 / 56430.0, kB5_5 = -9.0 / 50.0, kB5_6 = 2.0 / 55.0;
inline constexpr double kB4_1 = 25.0 / 216.0, kB4_3 = 1408.0 / 2565.0,
                        kB4_4 = 2197.0 / 4104.0, kB4_5 = -1.0 / 5.0;

}  // namespace detail

/// Core integrator over a generic RHS `void rhs(t, y, dy)`. When `store` is
/// false only the final state is kept (used by long Lyapunov runs).
template <class Rhs>
RawTrajectory integrate_raw(Rhs&& rhs, std::span<const double> y0, const IntegratorSpec& spec,
                            bool store = true) {
  spec.validate();
  const std::size_t dim = y0.size();
  RawTrajectory out;

  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> dy(dim);
  double t = spec.t0;

  auto eval = [&](double tt, const std::vector<double>& yy, std::vector<double>& dd) {
    rhs(tt, std::span<const double>(yy), std::span<double>(dd));
  };

  auto push = [&](double tt, const std::vector<double>& yy, const std::vector<double>& dd) {
    if (!store && !out.times.empty()) {
      out.times.back() = tt;
      out.states.back() = yy;
      out.derivs.back() = dd;
      return;
    }
    out.times.push_back(tt);
    out.states.push_back(yy);
    out.derivs.push_back(dd);
  };

  try {
    eval(t, y, dy);
    push(t, y, dy);

    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim);
    std::vector<double> work(dim), y4(dim), y5(dim);

    if (spec.method == Method::rk4_fixed) {
      // Step targets come from the index grid t0 + k·h, not from repeated
      // accumulation, so the final step is the true remainder and never a
      // rounding-noise sliver.
      const double span = spec.t1 - spec.t0;
      std::size_t n_full = static_cast<std::size_t>(std::floor(span / spec.step + 1e-9));
      double rem = span - static_cast<double>(n_full) * spec.step;
      if (rem <= spec.step * 1e-9) rem = 0.0;
      const std::size_t n_steps = n_full + (rem > 0.0 ? 1 : 0);
      for (std::size_t k = 0; k < n_steps; ++k) {
        double t_cur = spec.t0 + spec.step * static_cast<double>(k);
        double t_next =
            (k + 1 == n_steps) ? spec.t1 : spec.t0 + spec.step * static_cast<double>(k + 1);
        double h = t_next - t_cur;
        k1 = dy;
        for (std::size_t i = 0; i < dim; ++i) work[i] = y[i] + 0.5 * h * k1[i];
        eval(t_cur + 0.5 * h, work, k2);
        for (std::size_t i = 0; i < dim; ++i) work[i] = y[i] + 0.5 * h * k2[i];
        eval(t_cur + 0.5 * h, work, k3);
        for (std::size_t i = 0; i < dim; ++i) work[i] = y[i] + h * k3[i];
        eval(t_next, work, k4);
        for (std::size_t i = 0; i < dim; ++i)
          y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        t = t_next;
        eval(t, y, dy);
        ++out.accepted_steps;
        push(t, y, dy);
      }
    } else {
      double h = std::clamp((spec.t1 - spec.t0) / 100.0, spec.min_step, spec.max_step);
      while (t < spec.t1) {
        // Land on t1 without a sliver step: stretch into the remainder when
        // it fits in one step, split it in two when it fits in two.
        double remaining = spec.t1 - t;
        bool last = remaining <= h;
        double hs = last ? remaining : (remaining <= 2.0 * h ? 0.5 * remaining : h);

        k1 = dy;
        for (std::size_t i = 0; i < dim; ++i) work[i] = y[i] + hs * detail::kA21 * k1[i];
        eval(t + detail::kC2 * hs, work, k2);
        for (std::size_t i = 0; i < dim; ++i)
          work[i] = y[i] + hs * (detail::kA31 * k1[i] + detail::kA32 * k2[i]);
        eval(t + detail::kC3 * hs, work, k3);
        for (std::size_t i = 0; i < dim; ++i)
          work[i] = y[i] + hs * (detail::kA41 * k1[i] + detail::kA42 * k2[i] +
                                 detail::kA43 * k3[i]);
        eval(t + detail::kC4 * hs, work, k4);
        for (std::size_t i = 0; i < dim; ++i)
          work[i] = y[i] + hs * (detail::kA51 * k1[i] + detail::kA52 * k2[i] +
                                 detail::kA53 * k3[i] + detail::kA54 * k4[i]);
        eval(t + detail::kC5 * hs, work, k5);
        for (std::size_t i = 0; i < dim; ++i)
          work[i] = y[i] + hs * (detail::kA61 * k1[i] + detail::kA62 * k2[i] +
                                 detail::kA63 * k3[i] + detail::kA64 * k4[i] +
                                 detail::kA65 * k5[i]);
        eval(t + detail::kC6 * hs, work, k6);

        // Componentwise weighting: each entry is held to
        // abs_tol + rel_tol·|y_i|, so a growing variational block cannot
        // inflate the tolerance granted to the base block.
        double ratio = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
          y5[i] = y[i] + hs * (detail::kB5_1 * k1[i] + detail::kB5_3 * k3[i] +
                               detail::kB5_4 * k4[i] + detail::kB5_5 * k5[i] +
                               detail::kB5_6 * k6[i]);
          y4[i] = y[i] + hs * (detail::kB4_1 * k1[i] + detail::kB4_3 * k3[i] +
                               detail::kB4_4 * k4[i] + detail::kB4_5 * k5[i]);
          ratio = std::max(ratio, std::abs(y5[i] - y4[i]) /
                                      (spec.abs_tol + spec.rel_tol * std::abs(y[i])));
        }

        if (ratio <= 1.0) {
          t = last ? spec.t1 : t + hs;
          y = y5;
          eval(t, y, dy);
          ++out.accepted_steps;
          push(t, y, dy);
        } else {
          ++out.rejected_steps;
        }

        double factor = (ratio == 0.0) ? 5.0 : 0.9 * std::pow(1.0 / ratio, 0.2);
        factor = std::clamp(factor, 0.2, 5.0);
        h = std::min(hs * factor, spec.max_step);
        if (h < spec.min_step) {
          if (spec.t1 - t > spec.min_step) {
            out.termination = Termination::step_underflow;
            return out;
          }
          h = spec.min_step;
        }
      }
    }
  } catch (const DegeneracyError&) {
    out.termination = Termination::degenerate_m;
    return out;
  }
  out.termination = Termination::completed;
  return out;
}

// --- the extended system -----------------------------------------------------

/// Which computation path provides the variational accelerations.
enum class Route {
  matrices,  // M, C, K assembly plus linear solve
  gamma      // generic Euler-Lagrange solve on the prolonged Lagrangian
};

class ExtendedSystem {
 public:
  ExtendedSystem(LagrangianModel model, Route route)
      : model_(std::move(model)), route_(route) {
    if (route_ == Route::gamma) gamma_.emplace(prolong(model_));
  }

  std::size_t dimension() const { return model_.dimension(); }
  const LagrangianModel& model() const { return model_; }

  void rhs(double t, std::span<const double> y, std::span<double> dy) const {
    const std::size_t n = model_.dimension();
    std::span<const double> q = y.subspan(0, n);
    std::span<const double> qd = y.subspan(n, n);
    std::span<const double> eps = y.subspan(2 * n, n);
    std::span<const double> epsd = y.subspan(3 * n, n);
    std::vector<double> qdd, epsdd;
    if (route_ == Route::matrices) {
      qdd = el_accel(model_, q, qd, t);
      VariationalMatrices mats = variational_matrices(model_, q, qd, qdd, t);
      epsdd = variational_accel(mats, eps, epsd);
    } else {
      ExtendedState s;
      s.t = t;
      s.q.assign(q.begin(), q.end());
      s.qdot.assign(qd.begin(), qd.end());
      s.eps.assign(eps.begin(), eps.end());
      s.epsdot.assign(epsd.begin(), epsd.end());
      auto [a, b] = extended_accel(*gamma_, s);
      qdd = std::move(a);
      epsdd = std::move(b);
    }
    for (std::size_t i = 0; i < n; ++i) {
      dy[i] = qd[i];
      dy[n + i] = qdd[i];
      dy[2 * n + i] = epsd[i];
      dy[3 * n + i] = epsdd[i];
    }
  }

 private:
  LagrangianModel model_;
  Route route_;
  std::optional<LagrangianModel> gamma_;
};

/// Time derivative (qdot, qddot, epsdot, epsddot) of the extended state.
inline std::vector<double> extended_rhs(const LagrangianModel& model, const ExtendedState& s,
                                        Route route = Route::matrices) {
  s.validate(model.dimension());
  ExtendedSystem sys(model, route);
  std::vector<double> y = s.flatten();
  std::vector<double> dy(y.size());
  sys.rhs(s.t, y, dy);
  return dy;
}

struct Trajectory {
  std::vector<ExtendedState> samples;
  RawTrajectory raw;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  Termination termination = Termination::completed;

  ExtendedState state_at(double t) const {
    return ExtendedState::unflatten(t, raw.sample_at(t));
  }
};

/// Integrate the extended system from `initial` over spec's time span
/// (the state's own t field is ignored; spec.t0 is authoritative).
inline Trajectory integrate(const LagrangianModel& model, const ExtendedState& initial,
                            const IntegratorSpec& spec, Route route = Route::matrices) {
  initial.validate(model.dimension());
  ExtendedSystem sys(model, route);
  std::vector<double> y0 = initial.flatten();
  RawTrajectory raw = integrate_raw(
      [&sys](double t, std::span<const double> y, std::span<double> dy) { sys.rhs(t, y, dy); },
      y0, spec);
  Trajectory out;
  out.accepted_steps = raw.accepted_steps;
  out.rejected_steps = raw.rejected_steps;
  out.termination = raw.termination;
  out.samples.reserve(raw.times.size());
  for (std::size_t i = 0; i < raw.times.size(); ++i)
    out.samples.push_back(ExtendedState::unflatten(raw.times[i], raw.states[i]));
  out.raw = std::move(raw);
  return out;
}

// --- independent deviation oracle ---------------------------------------------

/// Base system only: y = (q, qdot), the eps block ignored entirely.
inline RawTrajectory integrate_base(const LagrangianModel& model, std::span<const double> q0,
                                    std::span<const double> qd0, const IntegratorSpec& spec,
                                    bool store = true) {
  const std::size_t n = model.dimension();
  std::vector<double> y0;
  y0.insert(y0.end(), q0.begin(), q0.end());
  y0.insert(y0.end(), qd0.begin(), qd0.end());
  auto rhs = [&model, n](double t, std::span<const double> y, std::span<double> dy) {
    std::vector<double> a = el_accel(model, y.subspan(0, n), y.subspan(n, n), t);
    for (std::size_t i = 0; i < n; ++i) {
      dy[i] = y[n + i];
      dy[n + i] = a[i];
    }
  };
  return integrate_raw(rhs, y0, spec, store);
}

/// Scaled difference between a perturbed and an unperturbed base trajectory,
/// sampled on the unperturbed grid: the finite-delta stand-in for the
/// variational flow, used as its independent oracle.
struct DeviationSeries {
  std::vector<double> times;
  std::vector<std::vector<double>> dq;     // (q' − q)/delta
  std::vector<std::vector<double>> dqdot;  // (qdot' − qdot)/delta
};

inline DeviationSeries two_trajectory_oracle(const LagrangianModel& model,
                                             const ExtendedState& initial, double delta,
                                             const IntegratorSpec& spec) {
  if (!(delta > 0.0)) throw std::invalid_argument("two_trajectory_oracle: delta must be > 0");
  const std::size_t n = model.dimension();
  initial.validate(n);
  std::vector<double> qp(n), qdp(n);
  for (std::size_t i = 0; i < n; ++i) {
    qp[i] = initial.q[i] + delta * initial.eps[i];
    qdp[i] = initial.qdot[i] + delta * initial.epsdot[i];
  }
  RawTrajectory base = integrate_base(model, initial.q, initial.qdot, spec);
  RawTrajectory pert = integrate_base(model, qp, qdp, spec);
  if (base.termination != Termination::completed || pert.termination != Termination::completed)
    throw std::runtime_error("two_trajectory_oracle: integration did not complete");

  DeviationSeries out;
  out.times = base.times;
  out.dq.reserve(base.times.size());
  out.dqdot.reserve(base.times.size());
  for (std::size_t k = 0; k < base.times.size(); ++k) {
    std::vector<double> yp = pert.sample_at(base.times[k]);
    std::vector<double> dq(n), dqd(n);
    for (std::size_t i = 0; i < n; ++i) {
      dq[i] = (yp[i] - base.states[k][i]) / delta;
      dqd[i] = (yp[n + i] - base.states[k][n + i]) / delta;
    }
    out.dq.push_back(std::move(dq));
    out.dqdot.push_back(std::move(dqd));
  }
  return out;
}

}  // namespace varlag
