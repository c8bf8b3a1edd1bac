// Command-line front end: runs extended-system simulations and analyses from
// a JSON config, writing trajectory CSVs and JSON summaries.
//
// Exit codes: 0 success, 1 config error, 2 check failure (drift, residual,
// or convergence-order), 3 degeneracy / step underflow / evaluation failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "varlag/runconfig.hpp"
#include "varlag/varlag.hpp"

namespace {

using namespace varlag;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitCheckFailed = 2;
constexpr int kExitRuntime = 3;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

ExtendedState initial_state(const RunConfig& cfg, const LagrangianModel& model) {
  const std::size_t n = model.dimension();
  auto check = [n](const std::vector<double>& v, const char* field) {
    if (v.size() != n)
      throw ConfigError(std::string("initial.") + field + ": expected " + std::to_string(n) +
                        " entries for model dimension " + std::to_string(n) + ", got " +
                        std::to_string(v.size()));
  };
  check(cfg.q0, "q");
  check(cfg.qd0, "qdot");
  check(cfg.eps0, "eps");
  check(cfg.epsd0, "epsdot");
  ExtendedState s;
  s.t = cfg.integrator.t0;
  s.q = cfg.q0;
  s.qdot = cfg.qd0;
  s.eps = cfg.eps0;
  s.epsdot = cfg.epsd0;
  return s;
}

json drift_to_json(const std::vector<DriftReport>& reports) {
  json arr = json::array();
  for (const DriftReport& r : reports) {
    json e;
    e["name"] = r.name;
    e["initial"] = r.initial;
    e["max_abs_drift"] = r.max_abs_drift;
    e["relative_drift"] = r.relative_drift;
    e["pass"] = r.pass;
    arr.push_back(e);
  }
  return arr;
}

void write_summary(const std::filesystem::path& path, const json& summary) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write summary file '" + path.string() + "'");
  out << summary.dump(2) << '\n';
}

json summary_skeleton(const RunConfig& cfg, const Timer& timer) {
  json s;
  s["schema"] = "varlag-summary-v1";
  s["analysis"] = cfg.analysis;
  s["model"] = cfg.model_name;
  s["config"] = config_to_json(cfg);
  s["config_hash"] = config_hash(cfg);
  s["timing"]["wall_seconds"] = timer.seconds();
  return s;
}

/// Identity residual block over trajectory samples (thinned to at most 200).
json identity_block(const LagrangianModel& model, const std::vector<ExtendedState>& samples) {
  json block;
  double momentum = 0.0, force = 0.0, homogeneity = 0.0;
  std::size_t stride = std::max<std::size_t>(1, samples.size() / 200);
  for (std::size_t i = 0; i < samples.size(); i += stride) {
    auto [rm, rf] = gamma_identity_residuals(model, samples[i]);
    momentum = std::max(momentum, rm);
    force = std::max(force, rf);
    double g = eval_gamma(model, samples[i]);
    homogeneity = std::max(homogeneity,
                           homogeneity_residual(model, samples[i]) / (1.0 + std::abs(g)));
  }
  block["momentum_reduction_max"] = momentum;
  block["force_reduction_max"] = force;
  block["homogeneity_max_scaled"] = homogeneity;
  if (samples.size() >= 3)
    block["total_derivative_residual"] = total_derivative_residual(model, samples);
  return block;
}

int cmd_run(const RunConfig& cfg, const std::filesystem::path& outdir) {
  Timer timer;
  LagrangianModel model = make_model(cfg.model_name, cfg.model_params);
  ExtendedState init = initial_state(cfg, model);
  std::vector<TrackedObservable> tracked = build_observables(cfg, model);

  Trajectory traj = integrate(model, init, cfg.integrator, cfg.route);

  {
    std::ofstream csv(outdir / cfg.trajectory_csv);
    if (!csv) throw ConfigError("cannot write trajectory file");
    write_trajectory_csv(csv, traj, tracked);
  }

  std::vector<DriftReport> drifts =
      drift_report(traj.samples, tracked, cfg.drift_threshold);
  bool all_pass = true;
  for (const DriftReport& r : drifts) all_pass = all_pass && r.pass;

  json summary = summary_skeleton(cfg, timer);
  summary["termination"] = to_string(traj.termination);
  summary["steps"]["accepted"] = traj.accepted_steps;
  summary["steps"]["rejected"] = traj.rejected_steps;
  summary["drift"] = drift_to_json(drifts);
  summary["all_drift_pass"] = all_pass;
  if (!traj.samples.empty()) summary["identities"] = identity_block(model, traj.samples);
  summary["timing"]["wall_seconds"] = timer.seconds();
  write_summary(outdir / cfg.summary_json, summary);

  if (traj.termination != Termination::completed) {
    std::cerr << "run terminated: " << to_string(traj.termination) << "\n";
    return kExitRuntime;
  }
  for (const DriftReport& r : drifts)
    std::cout << (r.pass ? "ok   " : "FAIL ") << r.name
              << " relative_drift=" << r.relative_drift << "\n";
  return all_pass ? kExitOk : kExitCheckFailed;
}

int cmd_oracle(const RunConfig& cfg, const std::filesystem::path& outdir) {
  Timer timer;
  LagrangianModel model = make_model(cfg.model_name, cfg.model_params);
  ExtendedState init = initial_state(cfg, model);
  bool has_direction = false;
  for (double v : init.eps) has_direction = has_direction || v != 0.0;
  for (double v : init.epsdot) has_direction = has_direction || v != 0.0;
  if (!has_direction)
    throw ConfigError("initial.eps/epsdot: oracle mode needs a nonzero direction");

  Trajectory ref = integrate(model, init, cfg.integrator, cfg.route);
  if (ref.termination != Termination::completed) {
    std::cerr << "reference run terminated: " << to_string(ref.termination) << "\n";
    return kExitRuntime;
  }

  std::vector<double> errors;
  for (double delta : cfg.oracle_deltas) {
    DeviationSeries dev = two_trajectory_oracle(model, init, delta, cfg.integrator);
    double worst = 0.0;
    for (std::size_t k = 0; k < dev.times.size(); ++k) {
      ExtendedState at = ref.state_at(dev.times[k]);
      for (std::size_t i = 0; i < at.eps.size(); ++i)
        worst = std::max(worst, std::abs(dev.dq[k][i] - at.eps[i]));
    }
    errors.push_back(worst);
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const std::size_t m = cfg.oracle_deltas.size();
  for (std::size_t i = 0; i < m; ++i) {
    double x = std::log(cfg.oracle_deltas[i]);
    double y = std::log(std::max(errors[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  bool pass = order >= 0.8 && order <= 1.2;

  json summary = summary_skeleton(cfg, timer);
  summary["oracle"]["deltas"] = cfg.oracle_deltas;
  summary["oracle"]["max_errors"] = errors;
  summary["oracle"]["fitted_order"] = order;
  summary["oracle"]["pass"] = pass;
  summary["timing"]["wall_seconds"] = timer.seconds();
  write_summary(outdir / cfg.summary_json, summary);

  std::cout << "fitted deviation convergence order: " << order
            << (pass ? " (pass)" : " (FAIL: expected within [0.8, 1.2])") << "\n";
  return pass ? kExitOk : kExitCheckFailed;
}

int cmd_lyapunov(const RunConfig& cfg, const std::filesystem::path& outdir) {
  Timer timer;
  LagrangianModel model = make_model(cfg.model_name, cfg.model_params);
  ExtendedState init = initial_state(cfg, model);
  LyapunovResult result =
      lyapunov_spectrum(model, init, cfg.lyapunov_exponents, cfg.lyapunov_renorm_interval,
                        cfg.lyapunov_t_total, cfg.integrator);
  if (result.termination != Termination::completed) {
    std::cerr << "lyapunov run terminated: " << to_string(result.termination) << "\n";
    return kExitRuntime;
  }

  {
    std::ofstream csv(outdir / cfg.trajectory_csv);
    if (!csv) throw ConfigError("cannot write convergence series file");
    csv << 't';
    for (std::size_t k = 0; k < result.exponents.size(); ++k) csv << ",lambda_" << k;
    csv << '\n';
    for (std::size_t i = 0; i < result.times.size(); ++i) {
      csv << format_g17(result.times[i]);
      for (std::size_t k = 0; k < result.exponents.size(); ++k)
        csv << ',' << format_g17(result.running[k][i]);
      csv << '\n';
    }
  }

  json summary = summary_skeleton(cfg, timer);
  summary["lyapunov"]["exponents"] = result.exponents;
  summary["lyapunov"]["renorm_interval"] = cfg.lyapunov_renorm_interval;
  summary["lyapunov"]["t_total"] = cfg.lyapunov_t_total;
  summary["timing"]["wall_seconds"] = timer.seconds();
  write_summary(outdir / cfg.summary_json, summary);

  std::cout << "exponents:";
  for (double l : result.exponents) std::cout << ' ' << l;
  std::cout << "\n";
  return kExitOk;
}

int cmd_identities(const RunConfig& cfg, const std::filesystem::path& outdir) {
  Timer timer;
  LagrangianModel model = make_model(cfg.model_name, cfg.model_params);
  LagrangianModel gamma = prolong(model);
  GaugeTerm default_gauge([](auto q, auto eps, auto t) {
    using T = std::decay_t<decltype(t)>;
    (void)t;
    T acc(0.0);
    for (std::size_t i = 0; i < q.size(); ++i) acc = acc + q[i] * eps[i];
    return acc;
  });
  LagrangianModel gauged = with_gauge(gamma, default_gauge);

  std::mt19937_64 rng(cfg.seed);
  double momentum = 0.0, force = 0.0, homogeneity = 0.0, hessw = 0.0;
  double route_equiv = 0.0, gauge_equiv = 0.0;
  for (std::size_t i = 0; i < cfg.identity_samples; ++i) {
    ExtendedState s = sample_extended_state(model, rng);
    auto [rm, rf] = gamma_identity_residuals(model, s);
    momentum = std::max(momentum, rm);
    force = std::max(force, rf);
    double g = eval_gamma(model, s);
    homogeneity =
        std::max(homogeneity, homogeneity_residual(model, s) / (1.0 + std::abs(g)));
    HessianW w = hessian_w(model, s);
    hessw = std::max(hessw, std::abs(w.value - w.via_operator) /
                                std::max(1.0, std::abs(w.value)));

    std::vector<double> a = el_accel(model, s.q, s.qdot, s.t);
    VariationalMatrices mats = variational_matrices(model, s.q, s.qdot, a, s.t);
    std::vector<double> ve = variational_accel(mats, s.eps, s.epsdot);
    auto [gq, ge] = extended_accel(gamma, s);
    double scale = 1.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    for (double v : ve) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k < a.size(); ++k) {
      route_equiv = std::max(route_equiv, std::abs(gq[k] - a[k]) / scale);
      route_equiv = std::max(route_equiv, std::abs(ge[k] - ve[k]) / scale);
    }
    auto [hq, he] = extended_accel(gauged, s);
    for (std::size_t k = 0; k < a.size(); ++k) {
      gauge_equiv = std::max(gauge_equiv, std::abs(hq[k] - gq[k]) / scale);
      gauge_equiv = std::max(gauge_equiv, std::abs(he[k] - ge[k]) / scale);
    }
  }

  json block;
  block["samples"] = cfg.identity_samples;
  block["momentum_reduction_max"] = momentum;
  block["force_reduction_max"] = force;
  block["homogeneity_max_scaled"] = homogeneity;
  block["hessian_w_max_rel"] = hessw;
  block["route_equivalence_max_rel"] = route_equiv;
  block["gauge_equivalence_max_rel"] = gauge_equiv;
  bool pass = momentum < 1e-12 && force < 1e-12 && homogeneity < 1e-12 && hessw < 1e-10 &&
              route_equiv < 1e-9 && gauge_equiv < 1e-9;
  block["pass"] = pass;

  json summary = summary_skeleton(cfg, timer);
  summary["identities"] = block;
  summary["timing"]["wall_seconds"] = timer.seconds();
  write_summary(outdir / cfg.summary_json, summary);

  std::cout << "momentum_reduction_max   " << momentum << "\n"
            << "force_reduction_max      " << force << "\n"
            << "homogeneity_max_scaled   " << homogeneity << "\n"
            << "hessian_w_max_rel        " << hessw << "\n"
            << "route_equivalence_max_rel " << route_equiv << "\n"
            << "gauge_equivalence_max_rel " << gauge_equiv << "\n"
            << (pass ? "all identities pass" : "IDENTITY CHECK FAILED") << "\n";
  return pass ? kExitOk : kExitCheckFailed;
}

int cmd_list_models() {
  for (const ModelInfo& info : model_catalog()) {
    std::cout << info.name << "\n  L: " << info.lagrangian
              << "\n  coordinates: " << info.coordinates << "\n  parameters:";
    if (info.defaults.empty()) std::cout << " (none)";
    for (const auto& [k, v] : info.defaults) std::cout << ' ' << k << '=' << v;
    std::cout << "\n";
    if (!info.notes.empty()) std::cout << "  note: " << info.notes << "\n";
    std::cout << "\n";
  }
  return kExitOk;
}

int dispatch(const std::string& mode, const std::string& config_path,
             const std::string& out_dir, std::optional<std::uint64_t> seed_override) {
  RunConfig cfg = load_config(config_path);
  if (cfg.analysis != mode)
    cfg.analysis = mode;  // the subcommand is authoritative over the config field
  if (seed_override) cfg.seed = *seed_override;

  std::filesystem::path outdir(out_dir);
  std::filesystem::create_directories(outdir);

  if (mode == "run") return cmd_run(cfg, outdir);
  if (mode == "oracle") return cmd_oracle(cfg, outdir);
  if (mode == "lyapunov") return cmd_lyapunov(cfg, outdir);
  return cmd_identities(cfg, outdir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prolonged-Lagrangian dynamics: simulation and conservation analysis"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (default: current)");
    sub->add_option("--seed", seed, "override the config's PRNG seed");
  };
  add_common(app.add_subcommand("run", "integrate the extended system, report drifts"));
  add_common(app.add_subcommand("oracle",
                                "finite-delta two-trajectory check of the variational flow"));
  add_common(app.add_subcommand("lyapunov", "estimate Lyapunov exponents"));
  add_common(app.add_subcommand("identities",
                                "verify structural identities at random states"));
  app.add_subcommand("list-models", "print the built-in model catalog");

  CLI11_PARSE(app, argc, argv);
  std::string mode = app.get_subcommands().front()->get_name();

  try {
    if (mode == "list-models") return cmd_list_models();
    return dispatch(mode, config_path, out_dir, seed);
  } catch (const varlag::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const varlag::DegeneracyError& e) {
    std::cerr << "degenerate system: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
