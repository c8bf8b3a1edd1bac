#pragma once

// Built-in mechanical systems. Model names and parameter keys are part of
// the CLI config contract; formulas are documented in the catalog and echoed
// by `list-models`.

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "varlag/model.hpp"

namespace varlag {

struct ModelInfo {
  std::string name;
  std::string lagrangian;             // human-readable formula
  std::string coordinates;            // meaning of q
  Params defaults;
  std::vector<std::string> positive;  // parameters that must be > 0
  std::string notes;
};

inline const std::vector<ModelInfo>& model_catalog() {
  static const std::vector<ModelInfo> catalog = {
      {"free_particle", "L = 1/2 m qd_0^2", "q_0: position", {{"m", 1.0}}, {"m"}, ""},
      {"harmonic_oscillator",
       "L = 1/2 m qd_0^2 - 1/2 k q_0^2",
       "q_0: displacement",
       {{"m", 1.0}, {"k", 1.0}},
       {"m", "k"},
       ""},
      {"pendulum",
       "L = 1/2 m l^2 qd_0^2 + m g l cos(q_0)",
       "q_0: angle from downward vertical",
       {{"m", 1.0}, {"l", 1.0}, {"g", 1.0}},
       {"m", "l", "g"},
       ""},
      {"kepler_polar",
       "L = 1/2 (qd_0^2 + q_0^2 qd_1^2) + mu / q_0",
       "q_0: radius r, q_1: polar angle theta",
       {{"mu", 1.0}},
       {"mu"},
       "theta is ignorable: L does not depend on the specific coordinate q_1, so its "
       "conjugate momentum p_theta = r^2 thetad is conserved; the sample domain keeps "
       "orbits bound and clear of the collision singularity"},
      {"double_pendulum",
       "L = 1/2 (m1+m2) l1^2 qd_0^2 + 1/2 m2 l2^2 qd_1^2 + m2 l1 l2 qd_0 qd_1 cos(q_0-q_1) "
       "+ (m1+m2) g l1 cos(q_0) + m2 g l2 cos(q_1)",
       "q_0, q_1: absolute rod angles from downward vertical",
       {{"m1", 1.0}, {"m2", 1.0}, {"l1", 1.0}, {"l2", 1.0}, {"g", 1.0}},
       {"m1", "m2", "l1", "l2", "g"},
       "absolute angles keep the mass matrix invertible everywhere for m1 > 0; the sample "
       "domain stays at small amplitudes where the motion is regular"},
      {"henon_heiles",
       "L = 1/2 (qd_0^2 + qd_1^2) - 1/2 (q_0^2 + q_1^2) - q_0^2 q_1 + q_1^3 / 3",
       "q_0: x, q_1: y",
       {},
       {},
       "canonical chaotic benchmark; chaotic above energy ~1/8, sample domain stays in the "
       "regular low-energy regime"},
      {"driven_oscillator",
       "L = 1/2 qd_0^2 - 1/2 q_0^2 + q_0 amplitude cos(omega t)",
       "q_0: displacement",
       {{"amplitude", 0.5}, {"omega", 2.0}},
       {"omega"},
       "explicitly time-dependent"},
  };
  return catalog;
}

namespace detail {

inline Params merge_params(const ModelInfo& info, const Params& overrides) {
  Params p = info.defaults;
  for (const auto& [key, value] : overrides) {
    if (p.find(key) == p.end())
      throw std::invalid_argument("model '" + info.name + "': unknown parameter '" + key + "'");
    p[key] = value;
  }
  for (const std::string& key : info.positive)
    if (p.at(key) <= 0.0)
      throw std::invalid_argument("model '" + info.name + "': parameter '" + key +
                                  "' must be positive");
  return p;
}

}  // namespace detail

/// Construct a built-in model by name; `overrides` replaces default
/// parameter values and rejects unknown keys or non-positive values where
/// positivity is required.
inline LagrangianModel make_model(const std::string& name, const Params& overrides = {}) {
  const ModelInfo* info = nullptr;
  for (const ModelInfo& m : model_catalog())
    if (m.name == name) info = &m;
  if (!info) {
    std::ostringstream msg;
    msg << "unknown model '" << name << "'; available:";
    for (const ModelInfo& m : model_catalog()) msg << ' ' << m.name;
    throw std::invalid_argument(msg.str());
  }
  Params p = detail::merge_params(*info, overrides);

  if (name == "free_particle") {
    double m = p.at("m");
    return LagrangianModel(
        name, 1, false, p,
        [m](auto q, auto qd, auto t) {
          (void)q;
          (void)t;
          return 0.5 * m * (qd[0] * qd[0]);
        },
        StateDomain::box(1, -2.0, 2.0));
  }
  if (name == "harmonic_oscillator") {
    double m = p.at("m"), k = p.at("k");
    return LagrangianModel(
        name, 1, false, p,
        [m, k](auto q, auto qd, auto t) {
          (void)t;
          return 0.5 * m * (qd[0] * qd[0]) - 0.5 * k * (q[0] * q[0]);
        },
        StateDomain::box(1, -2.0, 2.0));
  }
  if (name == "pendulum") {
    double m = p.at("m"), l = p.at("l"), g = p.at("g");
    // librations well inside the separatrix, where the shear rate of nearby
    // orbits stays moderate
    StateDomain d;
    d.q = {{-1.8, 1.8}};
    d.qdot = {{-0.9, 0.9}};
    return LagrangianModel(
        name, 1, false, p,
        [m, l, g](auto q, auto qd, auto t) {
          (void)t;
          return 0.5 * m * l * l * (qd[0] * qd[0]) + m * g * l * cos(q[0]);
        },
        d);
  }
  if (name == "kepler_polar") {
    double mu = p.at("mu");
    StateDomain d;
    d.q = {{0.95, 1.25}, {-3.1, 3.1}};
    d.qdot = {{-0.1, 0.1}, {0.85, 1.0}};
    return LagrangianModel(
        name, 2, false, p,
        [mu](auto q, auto qd, auto t) {
          (void)t;
          return 0.5 * (qd[0] * qd[0] + q[0] * q[0] * (qd[1] * qd[1])) + mu / q[0];
        },
        d);
  }
  if (name == "double_pendulum") {
    double m1 = p.at("m1"), m2 = p.at("m2"), l1 = p.at("l1"), l2 = p.at("l2"), g = p.at("g");
    StateDomain d;
    d.q = {{-0.35, 0.35}, {-0.35, 0.35}};
    d.qdot = {{-0.35, 0.35}, {-0.35, 0.35}};
    return LagrangianModel(
        name, 2, false, p,
        [m1, m2, l1, l2, g](auto q, auto qd, auto t) {
          (void)t;
          auto kinetic = 0.5 * (m1 + m2) * l1 * l1 * (qd[0] * qd[0]) +
                         0.5 * m2 * l2 * l2 * (qd[1] * qd[1]) +
                         m2 * l1 * l2 * (qd[0] * qd[1]) * cos(q[0] - q[1]);
          auto potential_neg =
              (m1 + m2) * g * l1 * cos(q[0]) + m2 * g * l2 * cos(q[1]);
          return kinetic + potential_neg;
        },
        d);
  }
  if (name == "henon_heiles") {
    return LagrangianModel(
        name, 2, false, p,
        [](auto q, auto qd, auto t) {
          (void)t;
          return 0.5 * (qd[0] * qd[0] + qd[1] * qd[1]) - 0.5 * (q[0] * q[0] + q[1] * q[1]) -
                 q[0] * q[0] * q[1] + q[1] * q[1] * q[1] / 3.0;
        },
        StateDomain::box(2, -0.12, 0.12));
  }
  if (name == "driven_oscillator") {
    double amplitude = p.at("amplitude"), omega = p.at("omega");
    return LagrangianModel(
        name, 1, true, p,
        [amplitude, omega](auto q, auto qd, auto t) {
          return 0.5 * (qd[0] * qd[0]) - 0.5 * (q[0] * q[0]) +
                 q[0] * amplitude * cos(omega * t);
        },
        StateDomain::box(1, -1.5, 1.5));
  }
  throw std::logic_error("model catalog out of sync with make_model");
}

inline std::vector<std::string> builtin_model_names() {
  std::vector<std::string> names;
  for (const ModelInfo& m : model_catalog()) names.push_back(m.name);
  return names;
}

}  // namespace varlag
