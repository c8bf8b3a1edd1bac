#pragma once

// The Lagrangian abstraction. A LagrangianModel owns a scalar function
// L(q, q̇, t) evaluatable on doubles and on nested duals up to depth four,
// which is what third-order derivative assembly (and derivative assembly on
// a prolonged Lagrangian, which internally differentiates L one level deeper
// than its own arguments) requires. Models are immutable after construction
// and freely shareable across threads.

#include <array>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "varlag/dual.hpp"

namespace varlag {

using Params = std::map<std::string, double>;

/// Per-coordinate sampling boxes used by randomized checks. Kept with the
/// model so every consumer draws states where the model is well-behaved
/// (e.g. bounded Kepler orbits, regular double-pendulum amplitudes).
struct StateDomain {
  std::vector<std::array<double, 2>> q;     // [lo, hi] per coordinate
  std::vector<std::array<double, 2>> qdot;  // [lo, hi] per coordinate

  static StateDomain box(std::size_t n, double lo, double hi) {
    StateDomain d;
    d.q.assign(n, {lo, hi});
    d.qdot.assign(n, {lo, hi});
    return d;
  }
};

class LagrangianModel {
 public:
  template <class F>
  LagrangianModel(std::string name, std::size_t dimension, bool time_dependent, Params params,
                  F f, StateDomain domain = {})
      : name_(std::move(name)),
        dim_(dimension),
        time_dependent_(time_dependent),
        params_(std::move(params)),
        domain_(std::move(domain)),
        f0_(f),
        f1_(f),
        f2_(f),
        f3_(f),
        f4_(f) {
    if (dim_ == 0) throw std::invalid_argument("LagrangianModel: dimension must be positive");
    if (domain_.q.empty()) domain_ = StateDomain::box(dim_, -1.0, 1.0);
  }

  const std::string& name() const { return name_; }
  std::size_t dimension() const { return dim_; }
  bool time_dependent() const { return time_dependent_; }
  const Params& parameters() const { return params_; }
  const StateDomain& sample_domain() const { return domain_; }

  template <class T>
  T eval(std::span<const T> q, std::span<const T> qd, T t) const {
    constexpr int depth = dual_depth_v<T>;
    if constexpr (depth == 0)
      return f0_(q, qd, t);
    else if constexpr (depth == 1)
      return f1_(q, qd, t);
    else if constexpr (depth == 2)
      return f2_(q, qd, t);
    else if constexpr (depth == 3)
      return f3_(q, qd, t);
    else if constexpr (depth == 4)
      return f4_(q, qd, t);
    else
      throw std::logic_error("LagrangianModel: derivative depth exceeds supported nesting");
  }

 private:
  template <class T>
  using Fn = std::function<T(std::span<const T>, std::span<const T>, T)>;

  std::string name_;
  std::size_t dim_;
  bool time_dependent_;
  Params params_;
  StateDomain domain_;
  Fn<double> f0_;
  Fn<Dual1> f1_;
  Fn<Dual2> f2_;
  Fn<Dual3> f3_;
  Fn<Dual4> f4_;
};

/// A gauge function g(q, ε, t) whose total time derivative is added to a
/// prolonged Lagrangian. The signature admits no velocity arguments, so a
/// velocity-dependent g cannot be constructed.
class GaugeTerm {
 public:
  template <class F>
  explicit GaugeTerm(F f) : g0_(f), g1_(f), g2_(f), g3_(f), g4_(f) {}

  template <class T>
  T eval(std::span<const T> q, std::span<const T> eps, T t) const {
    constexpr int depth = dual_depth_v<T>;
    if constexpr (depth == 0)
      return g0_(q, eps, t);
    else if constexpr (depth == 1)
      return g1_(q, eps, t);
    else if constexpr (depth == 2)
      return g2_(q, eps, t);
    else if constexpr (depth == 3)
      return g3_(q, eps, t);
    else if constexpr (depth == 4)
      return g4_(q, eps, t);
    else
      throw std::logic_error("GaugeTerm: derivative depth exceeds supported nesting");
  }

 private:
  template <class T>
  using Fn = std::function<T(std::span<const T>, std::span<const T>, T)>;

  Fn<double> g0_;
  Fn<Dual1> g1_;
  Fn<Dual2> g2_;
  Fn<Dual3> g3_;
  Fn<Dual4> g4_;
};

}  // namespace varlag
