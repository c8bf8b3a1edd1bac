#pragma once

// Prolongation of a Lagrangian to the extended configuration space and the
// machinery built on it:
//
//   * gamma(q, eps, qdot, epsdot) = dL/dq·eps + dL/dqdot·epsdot, the
//     directional derivative of L along a virtual displacement, itself a
//     Lagrangian in the 2N coordinates (q, eps);
//   * the variational matrices M, C, K whose linear system
//     M epsddot + C epsdot + K eps = 0 governs deviations between nearby
//     solutions;
//   * a generic Euler-Lagrange acceleration solve, usable both for L on Q
//     and for gamma on the extended space — the equivalence of the two
//     routes is the formulation's central claim and is continuously tested;
//   * the structural identities gamma satisfies (derivative reduction,
//     first-order homogeneity, the total-derivative form along solutions,
//     and the two expressions for the second-variation Hessian W).
//
// Total time derivatives inside C and K are expanded analytically along the
// flow using the acceleration from the Euler-Lagrange solve; the matrices
// are pointwise functions of (q, qdot, t) with no trajectory bookkeeping.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "varlag/derivatives.hpp"
#include "varlag/dual.hpp"
#include "varlag/linalg.hpp"
#include "varlag/model.hpp"
#include "varlag/state.hpp"

namespace varlag {

struct VariationalMatrices {
  Matd M;  // d²L/dqdot dqdot
  Matd C;  // d/dt(M) + d²L/dqdot dq − its transpose
  Matd K;  // d/dt(d²L/dqdot dq) − d²L/dq dq
};

/// Both evaluations of the second-variation Hessian: assembled from second
/// partials of L, and as half the directional derivative of gamma itself.
struct HessianW {
  double value = 0.0;
  double via_operator = 0.0;
};

namespace detail {

/// A direction in the (q, qdot, t) argument space. Empty spans mean zero.
struct Dir {
  std::span<const double> dq;
  std::span<const double> dqd;
  double dt = 0.0;
};

inline double at(std::span<const double> v, std::size_t i) {
  return v.empty() ? 0.0 : v[i];
}

/// First directional derivative of L along u, at arguments of any dual depth.
template <class T>
T dir1(const LagrangianModel& m, std::span<const T> q, std::span<const T> qd, const T& t,
       const Dir& u) {
  using D = Dual<T>;
  const std::size_t n = q.size();
  std::vector<D> Q(n), QD(n);
  for (std::size_t i = 0; i < n; ++i) {
    Q[i] = D{q[i], T(at(u.dq, i))};
    QD[i] = D{qd[i], T(at(u.dqd, i))};
  }
  D tt{t, T(u.dt)};
  D r = m.eval(std::span<const D>(Q), std::span<const D>(QD), tt);
  return r.dot;
}

/// Second directional derivative along (u, w).
template <class T>
T dir2(const LagrangianModel& m, std::span<const T> q, std::span<const T> qd, const T& t,
       const Dir& u, const Dir& w) {
  using D1 = Dual<T>;
  using D2 = Dual<D1>;
  const std::size_t n = q.size();
  std::vector<D2> Q(n), QD(n);
  for (std::size_t i = 0; i < n; ++i) {
    Q[i] = D2{D1{q[i], T(at(u.dq, i))}, D1{T(at(w.dq, i)), T(0.0)}};
    QD[i] = D2{D1{qd[i], T(at(u.dqd, i))}, D1{T(at(w.dqd, i)), T(0.0)}};
  }
  D2 tt{D1{t, T(u.dt)}, D1{T(w.dt), T(0.0)}};
  D2 r = m.eval(std::span<const D2>(Q), std::span<const D2>(QD), tt);
  return r.dot.dot;
}

/// Third directional derivative along (u, w, v); double arguments only.
inline double dir3(const LagrangianModel& m, std::span<const double> q,
                   std::span<const double> qd, double t, const Dir& u, const Dir& w,
                   const Dir& v) {
  const std::size_t n = q.size();
  std::vector<Dual3> Q(n), QD(n);
  for (std::size_t i = 0; i < n; ++i) {
    Q[i].val.val.val = q[i];
    Q[i].val.val.dot = at(u.dq, i);
    Q[i].val.dot.val = at(w.dq, i);
    Q[i].dot.val.val = at(v.dq, i);
    QD[i].val.val.val = qd[i];
    QD[i].val.val.dot = at(u.dqd, i);
    QD[i].val.dot.val = at(w.dqd, i);
    QD[i].dot.val.val = at(v.dqd, i);
  }
  Dual3 tt;
  tt.val.val.val = t;
  tt.val.val.dot = u.dt;
  tt.val.dot.val = w.dt;
  tt.dot.val.val = v.dt;
  Dual3 r = m.eval(std::span<const Dual3>(Q), std::span<const Dual3>(QD), tt);
  return r.dot.dot.dot;
}

/// Scratch basis vectors for seeding single-coordinate directions.
struct Basis {
  std::vector<double> a, b;
  explicit Basis(std::size_t n) : a(n, 0.0), b(n, 0.0) {}
};

}  // namespace detail

// --- prolongation -----------------------------------------------------------

/// The prolonged Lagrangian as a model on the extended space: 2N coordinates
/// (q, eps) with velocities (qdot, epsdot). Evaluation is one dual pass of L
/// seeded along the virtual displacement.
inline LagrangianModel prolong(const LagrangianModel& m) {
  const std::size_t n = m.dimension();
  auto gamma = [m, n](auto x, auto v, auto t) {
    using T = std::decay_t<decltype(t)>;
    using D = Dual<T>;
    std::vector<D> q(n), qd(n);
    for (std::size_t i = 0; i < n; ++i) {
      q[i] = D{x[i], x[n + i]};
      qd[i] = D{v[i], v[n + i]};
    }
    D tt{t, T(0.0)};
    return m.eval(std::span<const D>(q), std::span<const D>(qd), tt).dot;
  };
  StateDomain dom;
  dom.q = m.sample_domain().q;
  dom.qdot = m.sample_domain().qdot;
  dom.q.insert(dom.q.end(), n, {-1.0, 1.0});
  dom.qdot.insert(dom.qdot.end(), n, {-1.0, 1.0});
  return LagrangianModel(m.name() + ".prolonged", 2 * n, m.time_dependent(), m.parameters(),
                         gamma, dom);
}

/// gamma plus the total time derivative of a gauge function g(q, eps, t).
/// The added term dg/dt = dg/dq·qdot + dg/deps·epsdot + dg/dt leaves the
/// equations of motion unchanged.
inline LagrangianModel with_gauge(const LagrangianModel& gamma, GaugeTerm g) {
  const std::size_t n2 = gamma.dimension();
  if (n2 % 2 != 0)
    throw std::invalid_argument("with_gauge: expected a model on the extended space");
  const std::size_t n = n2 / 2;
  auto f = [gamma, g, n](auto x, auto v, auto t) {
    using T = std::decay_t<decltype(t)>;
    using D = Dual<T>;
    std::vector<D> q(n), e(n);
    for (std::size_t i = 0; i < n; ++i) {
      q[i] = D{x[i], v[i]};
      e[i] = D{x[n + i], v[n + i]};
    }
    D tt{t, T(1.0)};
    T dgdt = g.eval(std::span<const D>(q), std::span<const D>(e), tt).dot;
    return gamma.eval(x, v, t) + dgdt;
  };
  // A gauge function may introduce explicit time dependence; assume it does.
  return LagrangianModel(gamma.name() + ".gauged", n2, true, gamma.parameters(), f,
                         gamma.sample_domain());
}

/// gamma = dL/dq·eps + dL/dqdot·epsdot at a state, via one seeded pass.
inline double eval_gamma(const LagrangianModel& m, const ExtendedState& s) {
  s.validate(m.dimension());
  return detail::dir1<double>(m, s.q, s.qdot, s.t, detail::Dir{s.eps, s.epsdot, 0.0});
}

// --- Euler-Lagrange acceleration solve ---------------------------------------

/// Accelerations solving M qddot = dL/dq − d²L/dqdot dq · qdot − d²L/dqdot dt,
/// templated over the scalar type so the whole solve can itself be
/// differentiated with dual arguments.
template <class T>
std::vector<T> el_accel_t(const LagrangianModel& m, std::span<const T> q,
                          std::span<const T> qd, const T& t) {
  const std::size_t n = m.dimension();
  if (q.size() != n || qd.size() != n)
    throw std::invalid_argument("el_accel: state size does not match model dimension");
  detail::Basis e(n);
  Mat<T> mass(n, n);
  std::vector<T> rhs(n);
  for (std::size_t a = 0; a < n; ++a) {
    e.a[a] = 1.0;
    rhs[a] = detail::dir1(m, q, qd, t, detail::Dir{e.a, {}, 0.0}) -
             detail::dir2(m, q, qd, t, detail::Dir{{}, e.a, 0.0}, detail::Dir{{}, {}, 1.0});
    for (std::size_t b = 0; b < n; ++b) {
      e.b[b] = 1.0;
      mass(a, b) = detail::dir2(m, q, qd, t, detail::Dir{{}, e.a, 0.0},
                                detail::Dir{{}, e.b, 0.0});
      T mixed = detail::dir2(m, q, qd, t, detail::Dir{{}, e.a, 0.0},
                             detail::Dir{e.b, {}, 0.0});
      rhs[a] = rhs[a] - mixed * qd[b];
      e.b[b] = 0.0;
    }
    e.a[a] = 0.0;
  }
  LuFactors<T> lu(mass);
  if constexpr (std::is_same_v<T, double>) {
    double cond = condition_1(mass, lu);
    if (lu.singular() || cond > kDegeneracyThreshold) throw DegeneracyError(cond);
  } else {
    if (lu.singular()) throw DegeneracyError(std::numeric_limits<double>::infinity());
  }
  std::vector<T> acc = lu.solve(rhs);
  for (std::size_t a = 0; a < n; ++a)
    detail::require_finite(acc[a], "acceleration", a);
  return acc;
}

inline std::vector<double> el_accel(const LagrangianModel& m, std::span<const double> q,
                                    std::span<const double> qd, double t) {
  return el_accel_t<double>(m, q, qd, t);
}

/// M, C, K at a state, with the total time derivatives inside C and K
/// expanded along the flow direction (qdot, qddot, 1).
inline VariationalMatrices variational_matrices(const LagrangianModel& m,
                                                std::span<const double> q,
                                                std::span<const double> qd,
                                                std::span<const double> qdd, double t) {
  const std::size_t n = m.dimension();
  detail::Basis e(n);
  detail::Dir flow{qd, qdd, 1.0};
  Matd mass(n, n), mixed(n, n), dmass(n, n), dmixed(n, n), qq(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    e.a[a] = 1.0;
    for (std::size_t b = 0; b < n; ++b) {
      e.b[b] = 1.0;
      detail::Dir qd_a{{}, e.a, 0.0}, qd_b{{}, e.b, 0.0};
      detail::Dir q_a{e.a, {}, 0.0}, q_b{e.b, {}, 0.0};
      mass(a, b) = detail::dir2(m, q, qd, t, qd_a, qd_b);
      mixed(a, b) = detail::dir2(m, q, qd, t, qd_a, q_b);
      qq(a, b) = detail::dir2(m, q, qd, t, q_a, q_b);
      dmass(a, b) = detail::dir3(m, q, qd, t, qd_a, qd_b, flow);
      dmixed(a, b) = detail::dir3(m, q, qd, t, qd_a, q_b, flow);
      e.b[b] = 0.0;
    }
    e.a[a] = 0.0;
  }
  VariationalMatrices out{Matd(n, n), Matd(n, n), Matd(n, n)};
  out.M = mass;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      out.C(a, b) = dmass(a, b) + mixed(a, b) - mixed(b, a);
      out.K(a, b) = dmixed(a, b) - qq(a, b);
    }
  return out;
}

/// epsddot solving M epsddot = −C epsdot − K eps.
inline std::vector<double> variational_accel(const VariationalMatrices& mats,
                                             std::span<const double> eps,
                                             std::span<const double> epsdot) {
  const std::size_t n = mats.M.rows();
  std::vector<double> rhs(n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      rhs[a] -= mats.C(a, b) * epsdot[b] + mats.K(a, b) * eps[b];
  return solve_checked(mats.M, rhs);
}

/// Jacobian of the acceleration map a(q, qdot, t), column by column through
/// the dual-valued Euler-Lagrange solve. Independent oracle for the
/// variational system: epsddot must equal da/dq·eps + da/dqdot·epsdot.
inline std::pair<Matd, Matd> linearize_accel(const LagrangianModel& m,
                                             std::span<const double> q,
                                             std::span<const double> qd, double t) {
  const std::size_t n = m.dimension();
  std::vector<Dual1> qs(n), qds(n);
  for (std::size_t i = 0; i < n; ++i) {
    qs[i] = Dual1{q[i], 0.0};
    qds[i] = Dual1{qd[i], 0.0};
  }
  Dual1 tt{t, 0.0};
  Matd dadq(n, n), dadqd(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    qs[j].dot = 1.0;
    std::vector<Dual1> col = el_accel_t<Dual1>(m, qs, qds, tt);
    qs[j].dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dadq(i, j) = col[i].dot;
    qds[j].dot = 1.0;
    col = el_accel_t<Dual1>(m, qs, qds, tt);
    qds[j].dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dadqd(i, j) = col[i].dot;
  }
  return {dadq, dadqd};
}

/// Generic Euler-Lagrange solve on a model living on the extended space,
/// split back into (qddot, epsddot).
inline std::pair<std::vector<double>, std::vector<double>> extended_accel(
    const LagrangianModel& gamma, const ExtendedState& s) {
  const std::size_t n = gamma.dimension() / 2;
  s.validate(n);
  std::vector<double> x(2 * n), v(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = s.q[i];
    x[n + i] = s.eps[i];
    v[i] = s.qdot[i];
    v[n + i] = s.epsdot[i];
  }
  std::vector<double> a = el_accel(gamma, x, v, s.t);
  return {std::vector<double>(a.begin(), a.begin() + n),
          std::vector<double>(a.begin() + n, a.end())};
}

/// Treats gamma as an ordinary Lagrangian in the 2N coordinates (q, eps) and
/// solves its Euler-Lagrange system generically. In exact arithmetic the
/// result is (el_accel, variational_accel); no formula from the M/C/K
/// assembly enters this path.
inline std::pair<std::vector<double>, std::vector<double>> el_accel_on_gamma(
    const LagrangianModel& m, const ExtendedState& s) {
  return extended_accel(prolong(m), s);
}

// --- structural identities ----------------------------------------------------

/// Max-norm residuals of dgamma/depsdot = dL/dqdot and dgamma/deps = dL/dq,
/// with the gamma derivatives taken through the prolonged model as a black
/// box. Both must vanish to roundoff.
inline std::pair<double, double> gamma_identity_residuals(const LagrangianModel& m,
                                                          const ExtendedState& s) {
  const std::size_t n = m.dimension();
  s.validate(n);
  LagrangianModel gamma = prolong(m);
  std::vector<double> x(2 * n, 0.0), v(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = s.q[i];
    x[n + i] = s.eps[i];
    v[i] = s.qdot[i];
    v[n + i] = s.epsdot[i];
  }
  std::vector<double> ex(2 * n, 0.0);
  double r_momentum = 0.0, r_force = 0.0;
  detail::Basis e(n);
  for (std::size_t a = 0; a < n; ++a) {
    ex[n + a] = 1.0;
    double dg_depsdot =
        detail::dir1<double>(gamma, x, v, s.t, detail::Dir{{}, ex, 0.0});
    double dg_deps = detail::dir1<double>(gamma, x, v, s.t, detail::Dir{ex, {}, 0.0});
    ex[n + a] = 0.0;
    e.a[a] = 1.0;
    double dL_dqdot = detail::dir1<double>(m, s.q, s.qdot, s.t, detail::Dir{{}, e.a, 0.0});
    double dL_dq = detail::dir1<double>(m, s.q, s.qdot, s.t, detail::Dir{e.a, {}, 0.0});
    e.a[a] = 0.0;
    r_momentum = std::max(r_momentum, std::abs(dg_depsdot - dL_dqdot));
    r_force = std::max(r_force, std::abs(dg_deps - dL_dq));
  }
  return {r_momentum, r_force};
}

/// |gamma − dgamma/deps·eps − dgamma/depsdot·epsdot|: gamma is first-order
/// homogeneous in the virtual displacements.
inline double homogeneity_residual(const LagrangianModel& m, const ExtendedState& s) {
  const std::size_t n = m.dimension();
  s.validate(n);
  LagrangianModel gamma = prolong(m);
  std::vector<double> x(2 * n, 0.0), v(2 * n, 0.0), dx(2 * n, 0.0), dv(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = s.q[i];
    x[n + i] = s.eps[i];
    v[i] = s.qdot[i];
    v[n + i] = s.epsdot[i];
    dx[n + i] = s.eps[i];
    dv[n + i] = s.epsdot[i];
  }
  double value = gamma.eval<double>(x, v, s.t);
  double euler_sum = detail::dir1<double>(gamma, x, v, s.t, detail::Dir{dx, dv, 0.0});
  return std::abs(value - euler_sum);
}

/// The second-variation Hessian, once from second partials of L and once as
/// half the directional derivative of gamma in its (q, qdot) slots.
inline HessianW hessian_w(const LagrangianModel& m, const ExtendedState& s) {
  const std::size_t n = m.dimension();
  s.validate(n);
  detail::Basis e(n);
  double acc = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    e.a[a] = 1.0;
    for (std::size_t b = 0; b < n; ++b) {
      e.b[b] = 1.0;
      double qq = detail::dir2<double>(m, s.q, s.qdot, s.t, detail::Dir{e.a, {}, 0.0},
                                       detail::Dir{e.b, {}, 0.0});
      double qd_q = detail::dir2<double>(m, s.q, s.qdot, s.t, detail::Dir{{}, e.b, 0.0},
                                         detail::Dir{e.a, {}, 0.0});
      double qd_qd = detail::dir2<double>(m, s.q, s.qdot, s.t, detail::Dir{{}, e.a, 0.0},
                                          detail::Dir{{}, e.b, 0.0});
      acc += 0.5 * qq * s.eps[a] * s.eps[b] + qd_q * s.eps[a] * s.epsdot[b] +
             0.5 * qd_qd * s.epsdot[a] * s.epsdot[b];
      e.b[b] = 0.0;
    }
    e.a[a] = 0.0;
  }
  LagrangianModel gamma = prolong(m);
  std::vector<double> x(2 * n, 0.0), v(2 * n, 0.0), dx(2 * n, 0.0), dv(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = s.q[i];
    x[n + i] = s.eps[i];
    v[i] = s.qdot[i];
    v[n + i] = s.epsdot[i];
    dx[i] = s.eps[i];
    dv[i] = s.epsdot[i];
  }
  double via = 0.5 * detail::dir1<double>(gamma, x, v, s.t, detail::Dir{dx, dv, 0.0});
  return {acc, via};
}

/// Checks gamma = d/dt(dgamma/depsdot·eps) along an integrated trajectory by
/// comparing gamma at interior samples against a three-point derivative of
/// the bracketed product. The residual is O(h²) in the sample spacing.
inline double total_derivative_residual(const LagrangianModel& m,
                                        std::span<const ExtendedState> samples) {
  if (samples.size() < 3)
    throw std::invalid_argument("total_derivative_residual: need at least 3 samples");
  const std::size_t n = m.dimension();
  detail::Basis e(n);
  std::vector<double> product(samples.size());
  std::vector<double> gamma_val(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ExtendedState& s = samples[i];
    double acc = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      e.a[a] = 1.0;
      double p_eps =
          detail::dir1<double>(m, s.q, s.qdot, s.t, detail::Dir{{}, e.a, 0.0});
      e.a[a] = 0.0;
      acc += p_eps * s.eps[a];
    }
    product[i] = acc;
    gamma_val[i] = eval_gamma(m, s);
  }
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < samples.size(); ++i) {
    double h0 = samples[i].t - samples[i - 1].t;
    double h1 = samples[i + 1].t - samples[i].t;
    double deriv = product[i - 1] * (-h1 / (h0 * (h0 + h1))) +
                   product[i] * ((h1 - h0) / (h0 * h1)) +
                   product[i + 1] * (h0 / (h1 * (h0 + h1)));
    worst = std::max(worst, std::abs(deriv - gamma_val[i]));
  }
  return worst;
}

}  // namespace varlag
