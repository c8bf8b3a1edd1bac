#pragma once

// A point of the extended system: base coordinates and velocities together
// with the virtual displacement joining two nearby solutions and its rate.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace varlag {

struct ExtendedState {
  double t = 0.0;
  std::vector<double> q;
  std::vector<double> qdot;
  std::vector<double> eps;
  std::vector<double> epsdot;

  std::size_t dimension() const { return q.size(); }

  void validate(std::size_t n) const {
    auto check = [n](const std::vector<double>& v, const char* field) {
      if (v.size() != n)
        throw std::invalid_argument(std::string(field) + ": expected " + std::to_string(n) +
                                    " entries, got " + std::to_string(v.size()));
      for (double x : v)
        if (!std::isfinite(x))
          throw std::invalid_argument(std::string(field) + ": non-finite entry");
    };
    check(q, "q");
    check(qdot, "qdot");
    check(eps, "eps");
    check(epsdot, "epsdot");
    if (!std::isfinite(t)) throw std::invalid_argument("t: non-finite");
  }

  /// Flat layout (q, qdot, eps, epsdot), the order used by the integrator.
  std::vector<double> flatten() const {
    std::vector<double> y;
    y.reserve(4 * q.size());
    y.insert(y.end(), q.begin(), q.end());
    y.insert(y.end(), qdot.begin(), qdot.end());
    y.insert(y.end(), eps.begin(), eps.end());
    y.insert(y.end(), epsdot.begin(), epsdot.end());
    return y;
  }

  static ExtendedState unflatten(double t, std::span<const double> y) {
    const std::size_t n = y.size() / 4;
    ExtendedState s;
    s.t = t;
    s.q.assign(y.begin(), y.begin() + n);
    s.qdot.assign(y.begin() + n, y.begin() + 2 * n);
    s.eps.assign(y.begin() + 2 * n, y.begin() + 3 * n);
    s.epsdot.assign(y.begin() + 3 * n, y.begin() + 4 * n);
    return s;
  }
};

}  // namespace varlag
