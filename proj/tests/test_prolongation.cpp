#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "support.hpp"
#include "varlag/builtin_models.hpp"
#include "varlag/derivatives.hpp"
#include "varlag/integrate.hpp"
#include "varlag/prolongation.hpp"
#include "varlag/random.hpp"

using namespace varlag;

namespace {

ExtendedState make_state(std::vector<double> q, std::vector<double> qd, std::vector<double> e,
                         std::vector<double> ed, double t = 0.0) {
  ExtendedState s;
  s.t = t;
  s.q = std::move(q);
  s.qdot = std::move(qd);
  s.eps = std::move(e);
  s.epsdot = std::move(ed);
  return s;
}

}  // namespace

TEST_CASE("eval_gamma: fixed examples") {
  LagrangianModel ho = make_model("harmonic_oscillator");
  // gamma = (dL/dq) eps + (dL/dqdot) epsdot = (-q) eps + qdot epsdot
  CHECK(eval_gamma(ho, make_state({1.0}, {0.0}, {0.5}, {0.25})) ==
        doctest::Approx(-0.5).epsilon(1e-15));

  // linear in (eps, epsdot): zero displacement, zero gamma
  LagrangianModel dp = make_model("double_pendulum");
  CHECK(eval_gamma(dp, make_state({0.4, -0.2}, {0.1, 0.3}, {0.0, 0.0}, {0.0, 0.0})) == 0.0);

  LagrangianModel fp = make_model("free_particle");
  CHECK(eval_gamma(fp, make_state({0.0}, {2.0}, {0.0}, {3.0})) == 6.0);
}

TEST_CASE("derivative reduction identities hold at random states") {
  std::mt19937_64 rng(21);
  for (const char* name : {"harmonic_oscillator", "double_pendulum", "driven_oscillator"}) {
    LagrangianModel m = make_model(name);
    for (int i = 0; i < 25; ++i) {
      ExtendedState s = sample_extended_state(m, rng);
      auto [r_momentum, r_force] = gamma_identity_residuals(m, s);
      CHECK(r_momentum < 1e-12);
      CHECK(r_force < 1e-12);
    }
  }
  // the oscillator reduces exactly: both derivative paths produce the same
  // floating-point operations
  LagrangianModel ho = make_model("harmonic_oscillator");
  auto [rm, rf] = gamma_identity_residuals(ho, make_state({0.7}, {-0.4}, {0.3}, {0.9}));
  CHECK(rm <= 1e-14);
  CHECK(rf <= 1e-14);
}

TEST_CASE("gamma is first-order homogeneous in the virtual displacements") {
  std::mt19937_64 rng(22);
  LagrangianModel ho = make_model("harmonic_oscillator");
  for (int i = 0; i < 25; ++i) {
    ExtendedState s = sample_extended_state(ho, rng);
    double g = eval_gamma(ho, s);
    CHECK(homogeneity_residual(ho, s) < 1e-13 * (1.0 + std::abs(g)));

    // scaling check: gamma(q, lambda eps, qdot, lambda epsdot) = lambda gamma
    ExtendedState scaled = s;
    for (double& v : scaled.eps) v *= 2.5;
    for (double& v : scaled.epsdot) v *= 2.5;
    CHECK(eval_gamma(ho, scaled) ==
          doctest::Approx(2.5 * g).epsilon(1e-12));
  }
  ExtendedState zero = make_state({1.2}, {-0.3}, {0.0}, {0.0});
  CHECK(homogeneity_residual(ho, zero) == 0.0);
}

TEST_CASE("el_accel: fixed examples") {
  LagrangianModel ho = make_model("harmonic_oscillator");
  std::vector<double> q{1.0}, qd{0.0};
  CHECK(el_accel(ho, q, qd, 0.0)[0] == doctest::Approx(-1.0).epsilon(1e-14));

  LagrangianModel fp = make_model("free_particle");
  std::vector<double> q2{0.7}, qd2{1.9};
  CHECK(el_accel(fp, q2, qd2, 0.0)[0] == 0.0);

  LagrangianModel pend = make_model("pendulum");
  std::vector<double> qp{M_PI / 2.0}, qdp{0.0};
  CHECK(el_accel(pend, qp, qdp, 0.0)[0] == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("el_accel raises a degeneracy error on singular mass matrices") {
  // L linear in the velocity: M = 0
  LagrangianModel degenerate("degenerate", 1, false, {}, [](auto q, auto qd, auto t) {
    (void)t;
    return q[0] * qd[0];
  });
  std::vector<double> q{1.0}, qd{0.5};
  CHECK_THROWS_AS((void)el_accel(degenerate, q, qd, 0.0), DegeneracyError);

  // rank-1 mass matrix in two dimensions
  LagrangianModel rank1("rank1", 2, false, {}, [](auto q, auto qd, auto t) {
    (void)q;
    (void)t;
    auto s = qd[0] + qd[1];
    return 0.5 * (s * s);
  });
  std::vector<double> q2{0.1, 0.2}, qd2{0.3, 0.4};
  CHECK_THROWS_AS((void)el_accel(rank1, q2, qd2, 0.0), DegeneracyError);
}

TEST_CASE("variational matrices: fixed examples") {
  LagrangianModel ho = make_model("harmonic_oscillator");
  std::vector<double> q{0.8}, qd{-0.4};
  std::vector<double> qdd = el_accel(ho, q, qd, 0.0);
  VariationalMatrices m = variational_matrices(ho, q, qd, qdd, 0.0);
  CHECK(m.M(0, 0) == 1.0);
  CHECK(m.C(0, 0) == 0.0);
  CHECK(m.K(0, 0) == 1.0);

  LagrangianModel fp = make_model("free_particle", {{"m", 3.0}});
  std::vector<double> qf{0.0}, qdf{1.0};
  std::vector<double> qddf = el_accel(fp, qf, qdf, 0.0);
  VariationalMatrices mf = variational_matrices(fp, qf, qdf, qddf, 0.0);
  CHECK(mf.M(0, 0) == 3.0);
  CHECK(mf.C(0, 0) == 0.0);
  CHECK(mf.K(0, 0) == 0.0);

  LagrangianModel kp = make_model("kepler_polar");
  std::vector<double> qk{1.0, 0.2}, qdk{0.0, 1.0};
  std::vector<double> qddk = el_accel(kp, qk, qdk, 0.0);
  VariationalMatrices mk = variational_matrices(kp, qk, qdk, qddk, 0.0);
  CHECK(mk.M(0, 0) == 1.0);
  CHECK(mk.M(1, 1) == doctest::Approx(1.0).epsilon(1e-14));  // r^2 at r=1
  CHECK(mk.M(0, 1) == 0.0);
}

TEST_CASE("variational_accel: fixed examples") {
  LagrangianModel ho = make_model("harmonic_oscillator");
  std::vector<double> q{1.0}, qd{0.0};
  VariationalMatrices m = variational_matrices(ho, q, qd, el_accel(ho, q, qd, 0.0), 0.0);
  std::vector<double> e{1.0}, ed{0.0};
  CHECK(variational_accel(m, e, ed)[0] == doctest::Approx(-1.0).epsilon(1e-14));
  std::vector<double> z{0.0};
  CHECK(variational_accel(m, z, z)[0] == 0.0);

  LagrangianModel fp = make_model("free_particle");
  std::vector<double> qf{0.2}, qdf{0.9};
  VariationalMatrices mf = variational_matrices(fp, qf, qdf, el_accel(fp, qf, qdf, 0.0), 0.0);
  std::vector<double> e2{0.7}, ed2{-0.3};
  CHECK(variational_accel(mf, e2, ed2)[0] == 0.0);
}

TEST_CASE("linearize_accel oracle: fixed examples") {
  LagrangianModel ho = make_model("harmonic_oscillator");
  std::vector<double> q{0.3}, qd{0.8};
  auto [dadq, dadqd] = linearize_accel(ho, q, qd, 0.0);
  CHECK(dadq(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(dadqd(0, 0) == doctest::Approx(0.0).epsilon(1e-14));

  LagrangianModel pend = make_model("pendulum");
  std::vector<double> qp{0.0}, qdp{0.4};
  auto [pq, pqd] = linearize_accel(pend, qp, qdp, 0.0);
  CHECK(pq(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));  // -g/l at the bottom
  CHECK(pqd(0, 0) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("oracle equivalence: variational_accel matches the linearized acceleration map") {
  std::mt19937_64 rng(23);
  for (const ModelInfo& info : model_catalog()) {
    LagrangianModel m = make_model(info.name);
    const std::size_t n = m.dimension();
    for (int i = 0; i < 20; ++i) {
      ExtendedState s = sample_extended_state(m, rng);
      std::vector<double> qdd = el_accel(m, s.q, s.qdot, s.t);
      VariationalMatrices mats = variational_matrices(m, s.q, s.qdot, qdd, s.t);
      std::vector<double> direct = variational_accel(mats, s.eps, s.epsdot);
      auto [dadq, dadqd] = linearize_accel(m, s.q, s.qdot, s.t);
      std::vector<double> lin(n, 0.0);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
          lin[a] += dadq(a, b) * s.eps[b] + dadqd(a, b) * s.epsdot[b];
      double scale = std::max(1.0, vtest::max_abs(lin));
      CHECK(vtest::max_abs_diff(direct, lin) / scale < 1e-8);
    }
  }
}

TEST_CASE("central equivalence: generic Euler-Lagrange on gamma reproduces both blocks") {
  LagrangianModel ho = make_model("harmonic_oscillator");
  auto [qdd, edd] = el_accel_on_gamma(ho, make_state({1.0}, {0.0}, {1.0}, {0.0}));
  CHECK(qdd[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(edd[0] == doctest::Approx(-1.0).epsilon(1e-12));

  // zero displacement: variational block stays zero, base block matches el_accel
  auto [qdd0, edd0] = el_accel_on_gamma(ho, make_state({0.6}, {0.2}, {0.0}, {0.0}));
  CHECK(edd0[0] == 0.0);
  CHECK(qdd0[0] == doctest::Approx(el_accel(ho, std::vector<double>{0.6},
                                            std::vector<double>{0.2}, 0.0)[0])
                       .epsilon(1e-12));

  std::mt19937_64 rng(24);
  for (const ModelInfo& info : model_catalog()) {
    LagrangianModel m = make_model(info.name);
    for (int i = 0; i < 20; ++i) {
      ExtendedState s = sample_extended_state(m, rng);
      auto [gq, ge] = el_accel_on_gamma(m, s);
      std::vector<double> a = el_accel(m, s.q, s.qdot, s.t);
      VariationalMatrices mats = variational_matrices(m, s.q, s.qdot, a, s.t);
      std::vector<double> ve = variational_accel(mats, s.eps, s.epsdot);
      double scale = std::max({1.0, vtest::max_abs(a), vtest::max_abs(ve)});
      CHECK(vtest::max_abs_diff(gq, a) / scale < 1e-9);
      CHECK(vtest::max_abs_diff(ge, ve) / scale < 1e-9);
    }
  }
}

TEST_CASE("mass matrix symmetry and the antisymmetric part of C") {
  std::mt19937_64 rng(25);
  for (const ModelInfo& info : model_catalog()) {
    LagrangianModel m = make_model(info.name);
    const std::size_t n = m.dimension();
    for (int i = 0; i < 10; ++i) {
      ExtendedState s = sample_extended_state(m, rng);
      std::vector<double> qdd = el_accel(m, s.q, s.qdot, s.t);
      VariationalMatrices mats = variational_matrices(m, s.q, s.qdot, qdd, s.t);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
          CHECK(std::abs(mats.M(a, b) - mats.M(b, a)) < 1e-12);

      // (C − Cᵀ)/2 equals the velocity-position commutator of L, computed
      // here independently through the flattened hessian.
      const double t_fixed = s.t;
      auto flat = [&m, n, t_fixed](auto x) {
        return m.eval(x.subspan(0, n), x.subspan(n, n),
                      std::decay_t<decltype(x[0])>(t_fixed));
      };
      std::vector<double> xz;
      xz.insert(xz.end(), s.q.begin(), s.q.end());
      xz.insert(xz.end(), s.qdot.begin(), s.qdot.end());
      Matd h = hessian(flat, xz);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
          double commutator = h(n + a, b) - h(n + b, a);
          CHECK(0.5 * (mats.C(a, b) - mats.C(b, a)) ==
                doctest::Approx(commutator).epsilon(1e-11));
        }
    }
  }
}

TEST_CASE("autonomous models give bit-identical matrices at different times") {
  std::mt19937_64 rng(26);
  for (const ModelInfo& info : model_catalog()) {
    LagrangianModel m = make_model(info.name);
    if (m.time_dependent()) continue;
    ExtendedState s = sample_extended_state(m, rng);
    std::vector<double> qdd0 = el_accel(m, s.q, s.qdot, 0.0);
    std::vector<double> qdd1 = el_accel(m, s.q, s.qdot, 17.3);
    CHECK(std::memcmp(qdd0.data(), qdd1.data(), qdd0.size() * sizeof(double)) == 0);
    VariationalMatrices m0 = variational_matrices(m, s.q, s.qdot, qdd0, 0.0);
    VariationalMatrices m1 = variational_matrices(m, s.q, s.qdot, qdd1, 17.3);
    auto same = [](const Matd& a, const Matd& b) {
      return std::memcmp(a.data().data(), b.data().data(),
                         a.data().size() * sizeof(double)) == 0;
    };
    CHECK(same(m0.M, m1.M));
    CHECK(same(m0.C, m1.C));
    CHECK(same(m0.K, m1.K));
  }
}

TEST_CASE("hessian W: fixed examples and route agreement") {
  LagrangianModel fp = make_model("free_particle");
  HessianW w = hessian_w(fp, make_state({0.0}, {1.0}, {0.0}, {2.0}));
  CHECK(w.value == doctest::Approx(2.0).epsilon(1e-14));  // 1/2 m epsdot^2

  LagrangianModel ho = make_model("harmonic_oscillator");
  HessianW wz = hessian_w(ho, make_state({1.0}, {0.4}, {0.0}, {0.0}));
  CHECK(wz.value == 0.0);
  CHECK(wz.via_operator == 0.0);

  HessianW wh = hessian_w(ho, make_state({1.0}, {0.0}, {1.0}, {0.0}));
  CHECK(wh.value == doctest::Approx(-0.5).epsilon(1e-14));

  std::mt19937_64 rng(27);
  for (const ModelInfo& info : model_catalog()) {
    LagrangianModel m = make_model(info.name);
    for (int i = 0; i < 20; ++i) {
      ExtendedState s = sample_extended_state(m, rng);
      HessianW ww = hessian_w(m, s);
      CHECK(std::abs(ww.value - ww.via_operator) <=
            1e-10 * std::max(1.0, std::abs(ww.value)));
    }
  }
}

TEST_CASE("total-derivative identity along integrated trajectories") {
  // free particle: p_eps·eps = m qdot (eps0 + epsdot t) is exactly linear in
  // t, so the centered difference reproduces gamma exactly to rounding.
  LagrangianModel fp = make_model("free_particle");
  IntegratorSpec spec;
  spec.method = Method::rk4_fixed;
  spec.step = 1e-2;
  spec.t0 = 0.0;
  spec.t1 = 1.0;
  Trajectory tr = integrate(fp, make_state({0.0}, {1.5}, {0.2}, {0.7}), spec);
  CHECK(total_derivative_residual(fp, tr.samples) < 1e-12);

  // eps ≡ 0: both sides vanish identically
  LagrangianModel ho = make_model("harmonic_oscillator");
  Trajectory tz = integrate(ho, make_state({1.0}, {0.0}, {0.0}, {0.0}), spec);
  CHECK(total_derivative_residual(ho, tz.samples) == 0.0);

  // second-order convergence: halving the sample spacing cuts the residual
  // by at least 3.5x
  IntegratorSpec fine = spec;
  spec.step = 1e-3;
  fine.step = 5e-4;
  spec.t1 = fine.t1 = 2.0;
  ExtendedState init = make_state({1.0}, {0.0}, {0.3}, {-0.1});
  double r_h = total_derivative_residual(ho, integrate(ho, init, spec).samples);
  double r_h2 = total_derivative_residual(ho, integrate(ho, init, fine).samples);
  CHECK(r_h / r_h2 >= 3.5);

  // too few samples is an error
  CHECK_THROWS_AS(
      (void)total_derivative_residual(ho, std::vector<ExtendedState>{init, init}),
      std::invalid_argument);
}
