#pragma once

// Conserved quantities along extended trajectories: constants of motion of
// the base system and the constants they induce in the variational system
// (their directional derivative along the virtual displacement), Noether
// charges of both the base and the prolonged Lagrangian for one-parameter
// point symmetries, numeric verification of declared symmetries, and drift
// reports over integrated trajectories.
//
// Conventions: one group parameter, one time parameter. The charge of the
// base Lagrangian is J = L ξ + dL/dqdot·(ζ − qdot ξ); for time translation
// (ξ = 1) this is the negative of the usual energy, and the energy
// observable below is provided with the conventional sign instead.

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "varlag/dual.hpp"
#include "varlag/model.hpp"
#include "varlag/prolongation.hpp"
#include "varlag/state.hpp"

namespace varlag {

/// A scalar J(q, qdot, t), evaluatable on doubles and duals so it can be
/// differentiated along virtual displacements.
class ScalarObservable {
 public:
  template <class F>
  ScalarObservable(std::string name, F f)
      : name_(std::move(name)), o0_(f), o1_(f), o2_(f) {}

  const std::string& name() const { return name_; }

  template <class T>
  T eval(std::span<const T> q, std::span<const T> qd, T t) const {
    constexpr int depth = dual_depth_v<T>;
    if constexpr (depth == 0)
      return o0_(q, qd, t);
    else if constexpr (depth == 1)
      return o1_(q, qd, t);
    else if constexpr (depth == 2)
      return o2_(q, qd, t);
    else
      throw std::logic_error("ScalarObservable: derivative depth exceeds supported nesting");
  }

 private:
  template <class T>
  using Fn = std::function<T(std::span<const T>, std::span<const T>, T)>;
  std::string name_;
  Fn<double> o0_;
  Fn<Dual1> o1_;
  Fn<Dual2> o2_;
};

/// Jacobi integral E = dL/dqdot·qdot − L; rejected for explicitly
/// time-dependent models, where it is not conserved.
inline ScalarObservable energy_observable(const LagrangianModel& m) {
  if (m.time_dependent())
    throw std::invalid_argument("energy observable requires an autonomous model (got '" +
                                m.name() + "')");
  return ScalarObservable("energy", [m](auto q, auto qd, auto t) {
    using T = std::decay_t<decltype(t)>;
    using D = Dual<T>;
    const std::size_t n = q.size();
    std::vector<D> Q(n), QD(n);
    for (std::size_t i = 0; i < n; ++i) {
      Q[i] = D{q[i], T(0.0)};
      QD[i] = D{qd[i], qd[i]};
    }
    D r = m.eval(std::span<const D>(Q), std::span<const D>(QD), D{t, T(0.0)});
    return r.dot - r.val;
  });
}

/// Conjugate momentum p_a = dL/dqdot^a.
inline ScalarObservable momentum_observable(const LagrangianModel& m, std::size_t axis) {
  if (axis >= m.dimension())
    throw std::invalid_argument("momentum axis out of range for model '" + m.name() + "'");
  return ScalarObservable("momentum_" + std::to_string(axis),
                          [m, axis](auto q, auto qd, auto t) {
                            using T = std::decay_t<decltype(t)>;
                            using D = Dual<T>;
                            const std::size_t n = q.size();
                            std::vector<D> Q(n), QD(n);
                            for (std::size_t i = 0; i < n; ++i) {
                              Q[i] = D{q[i], T(0.0)};
                              QD[i] = D{qd[i], T(i == axis ? 1.0 : 0.0)};
                            }
                            D r = m.eval(std::span<const D>(Q), std::span<const D>(QD),
                                         D{t, T(0.0)});
                            return r.dot;
                          });
}

/// The constant the variational system inherits from J: its directional
/// derivative dJ/dq·eps + dJ/dqdot·epsdot at the extended state.
inline double inherited_constant(const ScalarObservable& J, const ExtendedState& s) {
  const std::size_t n = s.dimension();
  std::vector<Dual1> q(n), qd(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = Dual1{s.q[i], s.eps[i]};
    qd[i] = Dual1{s.qdot[i], s.epsdot[i]};
  }
  Dual1 r = J.eval(std::span<const Dual1>(q), std::span<const Dual1>(qd), Dual1{s.t, 0.0});
  return r.dot;
}

// --- point symmetries ---------------------------------------------------------

/// Infinitesimal generators of a one-parameter transformation of the
/// extended space: ζ(q, t) on configurations, ξ(q, t) on time, η(q, eps, t)
/// on virtual displacements. Declared symmetries are verified numerically
/// via symmetry_residual, never trusted.
class PointSymmetry {
 public:
  template <class Fz, class Fe, class Fx>
  PointSymmetry(std::size_t n, Fz zeta_fn, Fe eta_fn, Fx xi_fn, bool eta_zero,
                bool constant_generators)
      : n_(n),
        eta_zero_(eta_zero),
        constant_(constant_generators),
        z0_(zeta_fn),
        z1_(zeta_fn),
        e0_(eta_fn),
        e1_(eta_fn),
        x0_(xi_fn),
        x1_(xi_fn) {}

  static PointSymmetry constants(std::vector<double> zeta, std::vector<double> eta,
                                 double xi) {
    const std::size_t n = std::max(zeta.size(), eta.size());
    if (n == 0 && xi == 0.0)
      throw std::invalid_argument("PointSymmetry: at least one generator must be nonzero");
    if (zeta.empty()) zeta.assign(n, 0.0);
    if (eta.empty()) eta.assign(n, 0.0);
    if (zeta.size() != eta.size())
      throw std::invalid_argument("PointSymmetry: zeta/eta length mismatch");
    bool eta_zero = true;
    bool any = (xi != 0.0);
    for (double v : eta) {
      if (v != 0.0) eta_zero = false;
    }
    for (double v : zeta) any = any || (v != 0.0);
    any = any || !eta_zero;
    if (!any) throw std::invalid_argument("PointSymmetry: at least one generator must be nonzero");
    auto zf = [zeta](auto q, auto t) {
      using T = std::decay_t<decltype(t)>;
      (void)q;
      std::vector<T> out(zeta.size());
      for (std::size_t i = 0; i < zeta.size(); ++i) out[i] = T(zeta[i]);
      return out;
    };
    auto ef = [eta](auto q, auto eps, auto t) {
      using T = std::decay_t<decltype(t)>;
      (void)q;
      (void)eps;
      std::vector<T> out(eta.size());
      for (std::size_t i = 0; i < eta.size(); ++i) out[i] = T(eta[i]);
      return out;
    };
    auto xf = [xi](auto q, auto t) {
      using T = std::decay_t<decltype(t)>;
      (void)q;
      return T(xi);
    };
    return PointSymmetry(n, zf, ef, xf, eta_zero, true);
  }

  static PointSymmetry translation(std::size_t n, std::size_t axis) {
    std::vector<double> zeta(n, 0.0);
    zeta.at(axis) = 1.0;
    return constants(std::move(zeta), std::vector<double>(n, 0.0), 0.0);
  }

  static PointSymmetry eps_translation(std::size_t n, std::size_t axis) {
    std::vector<double> eta(n, 0.0);
    eta.at(axis) = 1.0;
    return constants(std::vector<double>(n, 0.0), std::move(eta), 0.0);
  }

  static PointSymmetry time_translation(std::size_t n) {
    return constants(std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 1.0);
  }

  /// Function-valued generators (library API only; the CLI config accepts
  /// constant arrays). eta_zero must be declared truthfully: it gates the
  /// reduction to an inherited constant.
  template <class Fz, class Fe, class Fx>
  static PointSymmetry functions(std::size_t n, Fz zeta_fn, Fe eta_fn, Fx xi_fn,
                                 bool eta_zero = false) {
    return PointSymmetry(n, zeta_fn, eta_fn, xi_fn, eta_zero, false);
  }

  std::size_t dimension() const { return n_; }
  bool eta_is_zero() const { return eta_zero_; }
  bool constant_generators() const { return constant_; }

  template <class T>
  std::vector<T> zeta(std::span<const T> q, T t) const {
    if constexpr (dual_depth_v<T> == 0)
      return z0_(q, t);
    else
      return z1_(q, t);
  }
  template <class T>
  std::vector<T> eta(std::span<const T> q, std::span<const T> eps, T t) const {
    if constexpr (dual_depth_v<T> == 0)
      return e0_(q, eps, t);
    else
      return e1_(q, eps, t);
  }
  template <class T>
  T xi(std::span<const T> q, T t) const {
    if constexpr (dual_depth_v<T> == 0)
      return x0_(q, t);
    else
      return x1_(q, t);
  }

 private:
  template <class T>
  using VecQ = std::function<std::vector<T>(std::span<const T>, T)>;
  template <class T>
  using VecQE = std::function<std::vector<T>(std::span<const T>, std::span<const T>, T)>;
  template <class T>
  using Scal = std::function<T(std::span<const T>, T)>;

  std::size_t n_;
  bool eta_zero_;
  bool constant_;
  VecQ<double> z0_;
  VecQ<Dual1> z1_;
  VecQE<double> e0_;
  VecQE<Dual1> e1_;
  Scal<double> x0_;
  Scal<Dual1> x1_;
};

namespace detail {

/// J = L ξ + dL/dqdot·(ζ − qdot ξ) at any dual depth the model supports.
template <class T>
T charge_of_base(const LagrangianModel& m, const PointSymmetry& sym, std::span<const T> q,
                 std::span<const T> qd, T t) {
  using D = Dual<T>;
  const std::size_t n = m.dimension();
  std::vector<T> zeta = sym.zeta(q, t);
  T xi = sym.xi(q, t);
  std::vector<D> Q(n), QD(n);
  for (std::size_t i = 0; i < n; ++i) {
    Q[i] = D{q[i], T(0.0)};
    QD[i] = D{qd[i], zeta[i] - qd[i] * xi};
  }
  D r = m.eval(std::span<const D>(Q), std::span<const D>(QD), D{t, T(0.0)});
  return r.val * xi + r.dot;
}

}  // namespace detail

/// Noether charge of the base Lagrangian for a symmetry acting on Q only
/// (η must be structurally zero).
inline double noether_charge_L(const LagrangianModel& m, const PointSymmetry& sym,
                               std::span<const double> q, std::span<const double> qd,
                               double t) {
  if (!sym.eta_is_zero())
    throw std::invalid_argument("noether_charge_L: symmetry must not act on eps");
  if (sym.dimension() != m.dimension())
    throw std::invalid_argument("noether_charge_L: symmetry dimension mismatch");
  std::vector<double> qv(q.begin(), q.end()), qdv(qd.begin(), qd.end());
  return detail::charge_of_base<double>(m, sym, qv, qdv, t);
}

/// Noether charge of the prolonged Lagrangian:
/// j = γ ξ + dγ/dqdot·(ζ − qdot ξ) + dγ/depsdot·(η − epsdot ξ).
/// `gamma` is a model on the extended space (prolong(model), possibly with a
/// gauge term added).
inline double noether_charge_gamma(const LagrangianModel& gamma, const PointSymmetry& sym,
                                   const ExtendedState& s) {
  const std::size_t n = gamma.dimension() / 2;
  s.validate(n);
  if (sym.dimension() != n)
    throw std::invalid_argument("noether_charge_gamma: symmetry dimension mismatch");
  std::vector<double> zeta = sym.zeta<double>(s.q, s.t);
  std::vector<double> eta = sym.eta<double>(s.q, s.eps, s.t);
  double xi = sym.xi<double>(s.q, s.t);
  std::vector<double> x(2 * n), v(2 * n), dv(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = s.q[i];
    x[n + i] = s.eps[i];
    v[i] = s.qdot[i];
    v[n + i] = s.epsdot[i];
    dv[i] = zeta[i] - s.qdot[i] * xi;
    dv[n + i] = eta[i] - s.epsdot[i] * xi;
  }
  double value = gamma.eval<double>(x, v, s.t);
  double contracted = detail::dir1<double>(gamma, x, v, s.t, detail::Dir{{}, dv, 0.0});
  return value * xi + contracted;
}

/// |j_gamma − D_eps J| where J is the base charge built from the same
/// (ζ, ξ). Vanishes whenever η ≡ 0 and the generators are constant; the
/// residual is the obstruction to reading the gamma charge as an inherited
/// constant.
inline double inherited_relation_residual(const LagrangianModel& m, const PointSymmetry& sym,
                                          const ExtendedState& s) {
  const std::size_t n = m.dimension();
  s.validate(n);
  double j_gamma = noether_charge_gamma(prolong(m), sym, s);
  std::vector<Dual1> q(n), qd(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = Dual1{s.q[i], s.eps[i]};
    qd[i] = Dual1{s.qdot[i], s.epsdot[i]};
  }
  Dual1 J = detail::charge_of_base<Dual1>(m, sym, q, qd, Dual1{s.t, 0.0});
  return std::abs(j_gamma - J.dot);
}

/// Numeric invariance check of gamma under the infinitesimal transformation:
/// the prolonged generator applied to gamma plus the time-dilation
/// compensation γ·dξ/dt must vanish identically for a symmetry. Returns the
/// max absolute residual over the sample states.
inline double symmetry_residual(const LagrangianModel& gamma, const PointSymmetry& sym,
                                std::span<const ExtendedState> states) {
  const std::size_t n = gamma.dimension() / 2;
  double worst = 0.0;
  for (const ExtendedState& s : states) {
    s.validate(n);
    std::vector<double> zeta = sym.zeta<double>(s.q, s.t);
    std::vector<double> eta = sym.eta<double>(s.q, s.eps, s.t);
    double xi = sym.xi<double>(s.q, s.t);

    // Total time derivatives of the generators along the flow.
    std::vector<Dual1> qf(n), ef(n);
    for (std::size_t i = 0; i < n; ++i) {
      qf[i] = Dual1{s.q[i], s.qdot[i]};
      ef[i] = Dual1{s.eps[i], s.epsdot[i]};
    }
    Dual1 tf{s.t, 1.0};
    std::vector<Dual1> zdot = sym.zeta<Dual1>(qf, tf);
    std::vector<Dual1> edot = sym.eta<Dual1>(qf, ef, tf);
    Dual1 xdot = sym.xi<Dual1>(qf, tf);

    std::vector<double> x(2 * n), v(2 * n), dx(2 * n), dv(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = s.q[i];
      x[n + i] = s.eps[i];
      v[i] = s.qdot[i];
      v[n + i] = s.epsdot[i];
      dx[i] = zeta[i];
      dx[n + i] = eta[i];
      dv[i] = zdot[i].dot - s.qdot[i] * xdot.dot;
      dv[n + i] = edot[i].dot - s.epsdot[i] * xdot.dot;
    }
    double value = gamma.eval<double>(x, v, s.t);
    double applied = detail::dir1<double>(gamma, x, v, s.t, detail::Dir{dx, dv, xi});
    worst = std::max(worst, std::abs(applied + value * xdot.dot));
  }
  return worst;
}

// --- drift reports -------------------------------------------------------------

/// A named quantity evaluated along extended trajectory samples.
struct TrackedObservable {
  std::string name;
  std::function<double(const ExtendedState&)> eval;
};

inline TrackedObservable track(const ScalarObservable& obs) {
  return {obs.name(),
          [obs](const ExtendedState& s) { return obs.eval<double>(s.q, s.qdot, s.t); }};
}

inline TrackedObservable track_inherited(const ScalarObservable& obs) {
  return {"inherited_" + obs.name(),
          [obs](const ExtendedState& s) { return inherited_constant(obs, s); }};
}

inline TrackedObservable track_noether_gamma(const LagrangianModel& model,
                                             const PointSymmetry& sym, std::string name) {
  LagrangianModel gamma = prolong(model);
  return {std::move(name),
          [gamma, sym](const ExtendedState& s) { return noether_charge_gamma(gamma, sym, s); }};
}

inline TrackedObservable track_noether_L(const LagrangianModel& model, const PointSymmetry& sym,
                                         std::string name) {
  return {std::move(name), [model, sym](const ExtendedState& s) {
            return noether_charge_L(model, sym, s.q, s.qdot, s.t);
          }};
}

struct DriftReport {
  std::string name;
  double initial = 0.0;
  double max_abs_drift = 0.0;
  double relative_drift = 0.0;  // max_abs_drift / max(1, |initial|)
  bool pass = true;
};

inline constexpr double kDefaultDriftThreshold = 1e-7;

inline std::vector<DriftReport> drift_report(std::span<const ExtendedState> samples,
                                             std::span<const TrackedObservable> observables,
                                             double threshold = kDefaultDriftThreshold) {
  std::vector<DriftReport> out;
  out.reserve(observables.size());
  for (const TrackedObservable& obs : observables) {
    DriftReport r;
    r.name = obs.name;
    if (!samples.empty()) {
      r.initial = obs.eval(samples.front());
      for (const ExtendedState& s : samples)
        r.max_abs_drift = std::max(r.max_abs_drift, std::abs(obs.eval(s) - r.initial));
      r.relative_drift = r.max_abs_drift / std::max(1.0, std::abs(r.initial));
    }
    r.pass = r.relative_drift < threshold;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace varlag
