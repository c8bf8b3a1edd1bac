#pragma once

// Run configuration and reporting for the command-line front end. The config
// file is JSON; the schema is documented in the README. Parsing reports
// field-level errors, serialization is canonical (sorted keys), and the
// config hash is FNV-1a over the canonical serialization so identical
// configs hash identically on every platform.

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "varlag/builtin_models.hpp"
#include "varlag/integrate.hpp"
#include "varlag/observables.hpp"

namespace varlag {

using nlohmann::json;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Declarative observable reference. Generator-based observables take
/// constant arrays (function-valued generators are library-API only).
struct ObservableSpec {
  enum class Kind {
    energy,
    momentum,
    inherited_energy,
    inherited_momentum,
    noether_l,
    noether_gamma,
    inherited_noether
  };
  Kind kind = Kind::energy;
  std::size_t index = 0;            // momentum axis
  std::vector<double> zeta, eta;    // generator arrays
  double xi = 0.0;
  std::string name;                 // column / report label

  bool operator==(const ObservableSpec&) const = default;
};

struct RunConfig {
  std::string model_name;
  Params model_params;

  std::vector<double> q0, qd0, eps0, epsd0;
  IntegratorSpec integrator;
  Route route = Route::matrices;

  std::vector<ObservableSpec> observables;
  std::string analysis = "run";  // run | oracle | lyapunov | identities

  std::string trajectory_csv = "trajectory.csv";
  std::string summary_json = "summary.json";

  std::uint64_t seed = 42;
  double drift_threshold = kDefaultDriftThreshold;

  std::vector<double> oracle_deltas = {1e-3, 1e-4, 1e-5};
  std::size_t lyapunov_exponents = 2;
  double lyapunov_renorm_interval = 1.0;
  double lyapunov_t_total = 1000.0;
  std::size_t identity_samples = 100;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace detail {

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + key + ": missing required field");
  return j.at(key);
}

inline double number_at(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number()) throw ConfigError(path + key + ": expected a number");
  return v.get<double>();
}

inline std::vector<double> array_at(const json& j, const std::string& key,
                                    const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_array()) throw ConfigError(path + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) throw ConfigError(path + key + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline ObservableSpec parse_observable(const json& j, std::size_t position) {
  const std::string path = "observables[" + std::to_string(position) + "]";
  ObservableSpec spec;
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    spec.name = s;
    if (s == "energy") {
      spec.kind = ObservableSpec::Kind::energy;
    } else if (s == "inherited_energy") {
      spec.kind = ObservableSpec::Kind::inherited_energy;
    } else if (s.rfind("momentum_", 0) == 0 || s.rfind("inherited_momentum_", 0) == 0) {
      bool inherited = s.rfind("inherited_", 0) == 0;
      spec.kind = inherited ? ObservableSpec::Kind::inherited_momentum
                            : ObservableSpec::Kind::momentum;
      std::string digits = s.substr(s.find_last_of('_') + 1);
      try {
        spec.index = static_cast<std::size_t>(std::stoul(digits));
      } catch (...) {
        throw ConfigError(path + ": malformed momentum axis in '" + s + "'");
      }
    } else {
      throw ConfigError(path + ": unknown observable '" + s + "'");
    }
    return spec;
  }
  if (!j.is_object()) throw ConfigError(path + ": expected a string or an object");
  std::string key;
  for (const char* k : {"noether_gamma", "noether_l", "inherited_noether"})
    if (j.contains(k)) key = k;
  if (key.empty())
    throw ConfigError(path + ": expected one of noether_gamma, noether_l, inherited_noether");
  spec.kind = key == "noether_gamma"   ? ObservableSpec::Kind::noether_gamma
              : key == "noether_l"     ? ObservableSpec::Kind::noether_l
                                       : ObservableSpec::Kind::inherited_noether;
  const json& body = j.at(key);
  spec.zeta = array_at(body, "zeta", path + "." + key + ".");
  spec.xi = body.contains("xi") ? number_at(body, "xi", path + "." + key + ".") : 0.0;
  if (body.contains("eta")) {
    if (spec.kind != ObservableSpec::Kind::noether_gamma)
      throw ConfigError(path + ": eta is only meaningful for noether_gamma");
    spec.eta = array_at(body, "eta", path + "." + key + ".");
  }
  spec.name = j.contains("name") ? j.at("name").get<std::string>() : key;
  return spec;
}

inline json observable_to_json(const ObservableSpec& s) {
  using K = ObservableSpec::Kind;
  switch (s.kind) {
    case K::energy:
      return json("energy");
    case K::inherited_energy:
      return json("inherited_energy");
    case K::momentum:
      return json("momentum_" + std::to_string(s.index));
    case K::inherited_momentum:
      return json("inherited_momentum_" + std::to_string(s.index));
    default: {
      json body;
      body["zeta"] = s.zeta;
      body["xi"] = s.xi;
      json o;
      if (s.kind == K::noether_gamma) {
        body["eta"] = s.eta.empty() ? std::vector<double>(s.zeta.size(), 0.0) : s.eta;
        o["noether_gamma"] = body;
      } else if (s.kind == K::noether_l) {
        o["noether_l"] = body;
      } else {
        o["inherited_noether"] = body;
      }
      o["name"] = s.name;
      return o;
    }
  }
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  RunConfig c;
  const json& model = detail::require(j, "model", "");
  c.model_name = detail::require(model, "name", "model.").get<std::string>();
  if (model.contains("parameters")) {
    const json& params = model.at("parameters");
    if (!params.is_object()) throw ConfigError("model.parameters: expected an object");
    for (auto it = params.begin(); it != params.end(); ++it) {
      if (!it.value().is_number())
        throw ConfigError("model.parameters." + it.key() + ": expected a number");
      c.model_params[it.key()] = it.value().get<double>();
    }
  }

  c.analysis = j.contains("analysis") ? j.at("analysis").get<std::string>() : "run";
  if (c.analysis != "run" && c.analysis != "oracle" && c.analysis != "lyapunov" &&
      c.analysis != "identities")
    throw ConfigError("analysis: expected one of run, oracle, lyapunov, identities");

  if (j.contains("initial")) {
    const json& init = j.at("initial");
    c.q0 = detail::array_at(init, "q", "initial.");
    c.qd0 = detail::array_at(init, "qdot", "initial.");
    c.eps0 = init.contains("eps") ? detail::array_at(init, "eps", "initial.")
                                  : std::vector<double>(c.q0.size(), 0.0);
    c.epsd0 = init.contains("epsdot") ? detail::array_at(init, "epsdot", "initial.")
                                      : std::vector<double>(c.q0.size(), 0.0);
  } else if (c.analysis != "identities") {
    throw ConfigError("initial: missing required field");
  }

  if (j.contains("integrator")) {
    const json& integ = j.at("integrator");
    std::string method =
        integ.contains("method") ? integ.at("method").get<std::string>() : "rkf45_adaptive";
    if (method == "rk4_fixed")
      c.integrator.method = Method::rk4_fixed;
    else if (method == "rkf45_adaptive")
      c.integrator.method = Method::rkf45_adaptive;
    else
      throw ConfigError("integrator.method: expected rk4_fixed or rkf45_adaptive");
    std::vector<double> span = detail::array_at(integ, "t_span", "integrator.");
    if (span.size() != 2 || !(span[1] > span[0]))
      throw ConfigError("integrator.t_span: expected [t0, t1] with t1 > t0");
    c.integrator.t0 = span[0];
    c.integrator.t1 = span[1];
    if (integ.contains("step")) c.integrator.step = detail::number_at(integ, "step", "integrator.");
    if (integ.contains("abs_tol"))
      c.integrator.abs_tol = detail::number_at(integ, "abs_tol", "integrator.");
    if (integ.contains("rel_tol"))
      c.integrator.rel_tol = detail::number_at(integ, "rel_tol", "integrator.");
    if (integ.contains("max_step"))
      c.integrator.max_step = detail::number_at(integ, "max_step", "integrator.");
    if (integ.contains("min_step"))
      c.integrator.min_step = detail::number_at(integ, "min_step", "integrator.");
    try {
      c.integrator.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("integrator: ") + e.what());
    }
  } else if (c.analysis == "run" || c.analysis == "oracle") {
    throw ConfigError("integrator: missing required field");
  }

  if (j.contains("route")) {
    std::string r = j.at("route").get<std::string>();
    if (r == "matrices")
      c.route = Route::matrices;
    else if (r == "gamma")
      c.route = Route::gamma;
    else
      throw ConfigError("route: expected matrices or gamma");
  }

  if (j.contains("observables")) {
    const json& obs = j.at("observables");
    if (!obs.is_array()) throw ConfigError("observables: expected an array");
    for (std::size_t i = 0; i < obs.size(); ++i)
      c.observables.push_back(detail::parse_observable(obs[i], i));
  }

  if (j.contains("output")) {
    const json& out = j.at("output");
    if (out.contains("trajectory_csv"))
      c.trajectory_csv = out.at("trajectory_csv").get<std::string>();
    if (out.contains("summary_json"))
      c.summary_json = out.at("summary_json").get<std::string>();
  }

  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("drift_threshold"))
    c.drift_threshold = detail::number_at(j, "drift_threshold", "");

  if (j.contains("oracle")) {
    c.oracle_deltas = detail::array_at(j.at("oracle"), "deltas", "oracle.");
    for (double d : c.oracle_deltas)
      if (!(d > 0.0)) throw ConfigError("oracle.deltas: entries must be positive");
    if (c.oracle_deltas.size() < 2)
      throw ConfigError("oracle.deltas: need at least two deltas to fit an order");
  }
  if (j.contains("lyapunov")) {
    const json& ly = j.at("lyapunov");
    if (ly.contains("n_exponents"))
      c.lyapunov_exponents = ly.at("n_exponents").get<std::size_t>();
    if (ly.contains("renorm_interval"))
      c.lyapunov_renorm_interval = detail::number_at(ly, "renorm_interval", "lyapunov.");
    c.lyapunov_t_total = detail::number_at(ly, "t_total", "lyapunov.");
  } else if (c.analysis == "lyapunov") {
    throw ConfigError("lyapunov: missing required field");
  }
  if (j.contains("identities")) {
    const json& id = j.at("identities");
    if (id.contains("samples")) c.identity_samples = id.at("samples").get<std::size_t>();
    if (c.identity_samples == 0) throw ConfigError("identities.samples: must be positive");
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Canonical echo of the effective configuration (all defaults resolved).
inline json config_to_json(const RunConfig& c) {
  json j;
  j["model"]["name"] = c.model_name;
  j["model"]["parameters"] = json::object();
  for (const auto& [k, v] : c.model_params) j["model"]["parameters"][k] = v;
  j["analysis"] = c.analysis;
  if (!c.q0.empty()) {
    j["initial"]["q"] = c.q0;
    j["initial"]["qdot"] = c.qd0;
    j["initial"]["eps"] = c.eps0;
    j["initial"]["epsdot"] = c.epsd0;
  }
  j["integrator"]["method"] =
      c.integrator.method == Method::rk4_fixed ? "rk4_fixed" : "rkf45_adaptive";
  j["integrator"]["t_span"] = {c.integrator.t0, c.integrator.t1};
  j["integrator"]["step"] = c.integrator.step;
  j["integrator"]["abs_tol"] = c.integrator.abs_tol;
  j["integrator"]["rel_tol"] = c.integrator.rel_tol;
  j["integrator"]["max_step"] = c.integrator.max_step;
  j["integrator"]["min_step"] = c.integrator.min_step;
  j["route"] = c.route == Route::matrices ? "matrices" : "gamma";
  j["observables"] = json::array();
  for (const ObservableSpec& s : c.observables)
    j["observables"].push_back(detail::observable_to_json(s));
  j["output"]["trajectory_csv"] = c.trajectory_csv;
  j["output"]["summary_json"] = c.summary_json;
  j["seed"] = c.seed;
  j["drift_threshold"] = c.drift_threshold;
  j["oracle"]["deltas"] = c.oracle_deltas;
  j["lyapunov"]["n_exponents"] = c.lyapunov_exponents;
  j["lyapunov"]["renorm_interval"] = c.lyapunov_renorm_interval;
  j["lyapunov"]["t_total"] = c.lyapunov_t_total;
  j["identities"]["samples"] = c.identity_samples;
  return j;
}

inline std::string config_hash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(c).dump())));
  return std::string(buf);
}

/// Build the tracked observables a config requests against a model,
/// validating dimensions and autonomy.
inline std::vector<TrackedObservable> build_observables(const RunConfig& c,
                                                        const LagrangianModel& model) {
  const std::size_t n = model.dimension();
  std::vector<TrackedObservable> out;
  for (std::size_t i = 0; i < c.observables.size(); ++i) {
    const ObservableSpec& s = c.observables[i];
    const std::string path = "observables[" + std::to_string(i) + "]";
    using K = ObservableSpec::Kind;
    try {
      switch (s.kind) {
        case K::energy:
          out.push_back(track(energy_observable(model)));
          break;
        case K::inherited_energy:
          out.push_back(track_inherited(energy_observable(model)));
          break;
        case K::momentum:
          out.push_back(track(momentum_observable(model, s.index)));
          break;
        case K::inherited_momentum:
          out.push_back(track_inherited(momentum_observable(model, s.index)));
          break;
        case K::noether_l:
        case K::noether_gamma:
        case K::inherited_noether: {
          if (s.zeta.size() != n)
            throw std::invalid_argument("zeta: expected " + std::to_string(n) + " entries, got " +
                                        std::to_string(s.zeta.size()));
          if (!s.eta.empty() && s.eta.size() != n)
            throw std::invalid_argument("eta: expected " + std::to_string(n) + " entries, got " +
                                        std::to_string(s.eta.size()));
          PointSymmetry sym = PointSymmetry::constants(
              s.zeta, s.eta.empty() ? std::vector<double>(n, 0.0) : s.eta, s.xi);
          if (s.kind == K::noether_gamma) {
            out.push_back(track_noether_gamma(model, sym, s.name));
          } else if (s.kind == K::noether_l) {
            out.push_back(track_noether_L(model, sym, s.name));
          } else {
            TrackedObservable t;
            t.name = s.name;
            t.eval = [model, sym](const ExtendedState& st) {
              std::vector<Dual1> q(st.q.size()), qd(st.q.size());
              for (std::size_t k = 0; k < st.q.size(); ++k) {
                q[k] = Dual1{st.q[k], st.eps[k]};
                qd[k] = Dual1{st.qdot[k], st.epsdot[k]};
              }
              return detail::charge_of_base<Dual1>(model, sym, q, qd, Dual1{st.t, 0.0}).dot;
            };
            out.push_back(std::move(t));
          }
          break;
        }
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  return out;
}

/// Full 17-significant-digit decimal rendering: lossless round trip of
/// doubles for downstream diffing.
inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                                 std::span<const TrackedObservable> observables) {
  if (traj.samples.empty()) return;
  const std::size_t n = traj.samples.front().dimension();
  os << 't';
  for (std::size_t i = 0; i < n; ++i) os << ",q_" << i;
  for (std::size_t i = 0; i < n; ++i) os << ",qd_" << i;
  for (std::size_t i = 0; i < n; ++i) os << ",eps_" << i;
  for (std::size_t i = 0; i < n; ++i) os << ",epsd_" << i;
  for (const TrackedObservable& o : observables) os << ',' << o.name;
  os << '\n';
  for (const ExtendedState& s : traj.samples) {
    os << format_g17(s.t);
    for (double v : s.q) os << ',' << format_g17(v);
    for (double v : s.qdot) os << ',' << format_g17(v);
    for (double v : s.eps) os << ',' << format_g17(v);
    for (double v : s.epsdot) os << ',' << format_g17(v);
    for (const TrackedObservable& o : observables) os << ',' << format_g17(o.eval(s));
    os << '\n';
  }
}

}  // namespace varlag
