#pragma once

// Deterministic sampling helpers. Uniform variates are generated directly
// from mt19937_64 output rather than through std distributions, so identical
// seeds give identical states on every platform.

#include <random>
#include <span>

#include "varlag/model.hpp"
#include "varlag/state.hpp"

namespace varlag {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

/// Random extended state drawn from the model's per-coordinate sample boxes,
/// with virtual displacements in [-1, 1] and t in [0, 5].
inline ExtendedState sample_extended_state(const LagrangianModel& m, std::mt19937_64& rng) {
  const StateDomain& d = m.sample_domain();
  ExtendedState s;
  const std::size_t n = m.dimension();
  s.q.resize(n);
  s.qdot.resize(n);
  s.eps.resize(n);
  s.epsdot.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.q[i] = uniform(rng, d.q[i][0], d.q[i][1]);
  for (std::size_t i = 0; i < n; ++i) s.qdot[i] = uniform(rng, d.qdot[i][0], d.qdot[i][1]);
  for (std::size_t i = 0; i < n; ++i) s.eps[i] = uniform(rng, -1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) s.epsdot[i] = uniform(rng, -1.0, 1.0);
  s.t = uniform(rng, 0.0, 5.0);
  return s;
}

}  // namespace varlag
