// End-to-end exercises of the command-line tool: every documented exit code,
// artifact layout, and byte-identical reruns. The binary path comes from the
// build system.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#ifndef VARLAG_CLI_PATH
#error "VARLAG_CLI_PATH must be defined by the build"
#endif

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run_cli(const std::string& args, const fs::path& dir) {
  fs::create_directories(dir);
  fs::path out = dir / "stdout.txt";
  fs::path err = dir / "stderr.txt";
  std::string cmd = std::string(VARLAG_CLI_PATH) + " " + args + " > " + out.string() +
                    " 2> " + err.string();
  int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WEXITSTATUS(status);
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path scratch_dir(const std::string& label) {
  fs::path p = fs::path(VARLAG_CLI_PATH).parent_path() / "cli_scratch" / label;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

const char* kHarmonicRun = R"({
  "model": {"name": "harmonic_oscillator"},
  "initial": {"q": [1.0], "qdot": [0.0], "eps": [1.0], "epsdot": [0.0]},
  "integrator": {"method": "rk4_fixed", "step": 1e-3, "t_span": [0.0, 6.283185307179586]},
  "observables": ["energy", "inherited_energy"],
  "analysis": "run"
})";

}  // namespace

TEST_CASE("cli: successful run writes csv and summary, exits 0") {
  fs::path dir = scratch_dir("run_ok");
  write_file(dir / "cfg.json", kHarmonicRun);
  CliResult r = run_cli("run --config " + (dir / "cfg.json").string() + " --out " +
                            (dir / "out").string(),
                        dir);
  CHECK(r.exit_code == 0);

  std::string csv = slurp(dir / "out" / "trajectory.csv");
  CHECK(csv.rfind("t,q_0,qd_0,eps_0,epsd_0,energy,inherited_energy\n", 0) == 0);

  // closed form: q(2pi) back to 1 within 1e-8, eps within 1e-7
  std::string last = csv.substr(csv.find_last_of('\n', csv.size() - 2) + 1);
  double t, q, qd, eps;
  char c;
  std::istringstream row(last);
  row >> t >> c >> q >> c >> qd >> c >> eps;
  CHECK(std::abs(t - 6.283185307179586) < 1e-15);
  CHECK(std::abs(q - 1.0) < 1e-8);
  CHECK(std::abs(eps - 1.0) < 1e-7);

  json summary = json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(summary["termination"] == "completed");
  CHECK(summary["all_drift_pass"] == true);
  CHECK(summary["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("cli: kepler run conserves the momentum pair") {
  fs::path dir = scratch_dir("run_kepler");
  write_file(dir / "cfg.json", R"({
    "model": {"name": "kepler_polar", "parameters": {"mu": 1.0}},
    "initial": {"q": [1.0, 0.0], "qdot": [0.0, 1.0],
                "eps": [0.1, -0.05], "epsdot": [0.02, 0.03]},
    "integrator": {"method": "rkf45_adaptive", "abs_tol": 1e-10, "rel_tol": 1e-10,
                   "max_step": 0.1, "min_step": 1e-12, "t_span": [0.0, 100.0]},
    "observables": ["momentum_1", "inherited_momentum_1"],
    "analysis": "run"
  })");
  CliResult r = run_cli("run --config " + (dir / "cfg.json").string() + " --out " +
                            (dir / "out").string(),
                        dir);
  CHECK(r.exit_code == 0);
  json summary = json::parse(slurp(dir / "out" / "summary.json"));
  for (const json& d : summary["drift"]) {
    CHECK(d["relative_drift"].get<double>() < 1e-7);
    CHECK(d["pass"] == true);
  }
}

TEST_CASE("cli: reruns of an identical config are byte-identical") {
  fs::path dir = scratch_dir("run_repro");
  write_file(dir / "cfg.json", kHarmonicRun);
  std::string base = "run --config " + (dir / "cfg.json").string();
  CliResult a = run_cli(base + " --out " + (dir / "a").string(), dir);
  CliResult b = run_cli(base + " --out " + (dir / "b").string(), dir);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);

  CHECK(slurp(dir / "a" / "trajectory.csv") == slurp(dir / "b" / "trajectory.csv"));

  json sa = json::parse(slurp(dir / "a" / "summary.json"));
  json sb = json::parse(slurp(dir / "b" / "summary.json"));
  sa.erase("timing");
  sb.erase("timing");
  CHECK(sa.dump() == sb.dump());
}

TEST_CASE("cli: config errors exit 1 with a field-level message") {
  fs::path dir = scratch_dir("run_badcfg");
  write_file(dir / "cfg.json", R"({
    "model": {"name": "harmonic_oscillator"},
    "initial": {"q": [1.0], "qdot": [0.0], "eps": [1.0, 2.0], "epsdot": [0.0]},
    "integrator": {"method": "rk4_fixed", "step": 1e-3, "t_span": [0.0, 1.0]},
    "analysis": "run"
  })");
  CliResult r = run_cli("run --config " + (dir / "cfg.json").string() + " --out " +
                            (dir / "out").string(),
                        dir);
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("initial.eps") != std::string::npos);

  write_file(dir / "unknown.json", R"({
    "model": {"name": "tachyon"},
    "initial": {"q": [1.0], "qdot": [0.0]},
    "integrator": {"method": "rk4_fixed", "step": 1e-3, "t_span": [0.0, 1.0]}
  })");
  CliResult u = run_cli("run --config " + (dir / "unknown.json").string() + " --out " +
                            (dir / "out").string(),
                        dir);
  CHECK(u.exit_code == 1);
  CHECK(u.err.find("tachyon") != std::string::npos);

  write_file(dir / "broken.json", "{ not json ");
  CliResult j = run_cli("run --config " + (dir / "broken.json").string(), dir);
  CHECK(j.exit_code == 1);
}

TEST_CASE("cli: drift failure exits 2") {
  fs::path dir = scratch_dir("run_drift");
  json cfg = json::parse(kHarmonicRun);
  cfg["drift_threshold"] = 1e-18;
  write_file(dir / "cfg.json", cfg.dump());
  CliResult r = run_cli("run --config " + (dir / "cfg.json").string() + " --out " +
                            (dir / "out").string(),
                        dir);
  CHECK(r.exit_code == 2);
  CHECK(r.out.find("FAIL") != std::string::npos);
}

TEST_CASE("cli: step underflow exits 3") {
  fs::path dir = scratch_dir("run_underflow");
  write_file(dir / "cfg.json", R"({
    "model": {"name": "harmonic_oscillator"},
    "initial": {"q": [1.0], "qdot": [0.0], "eps": [0.0], "epsdot": [0.0]},
    "integrator": {"method": "rkf45_adaptive", "t_span": [0.0, 10.0],
                   "abs_tol": 1e-13, "rel_tol": 1e-13, "max_step": 1.0, "min_step": 0.5},
    "analysis": "run"
  })");
  CliResult r = run_cli("run --config " + (dir / "cfg.json").string() + " --out " +
                            (dir / "out").string(),
                        dir);
  CHECK(r.exit_code == 3);
  json summary = json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(summary["termination"] == "step_underflow");
}

TEST_CASE("cli: oracle subcommand reports first-order convergence") {
  fs::path dir = scratch_dir("oracle");
  write_file(dir / "cfg.json", R"({
    "model": {"name": "pendulum"},
    "initial": {"q": [1.2], "qdot": [0.0], "eps": [1.0], "epsdot": [0.5]},
    "integrator": {"method": "rk4_fixed", "step": 1e-3, "t_span": [0.0, 5.0]},
    "analysis": "oracle",
    "oracle": {"deltas": [1e-3, 1e-4, 1e-5]}
  })");
  CliResult r = run_cli("oracle --config " + (dir / "cfg.json").string() + " --out " +
                            (dir / "out").string(),
                        dir);
  CHECK(r.exit_code == 0);
  json summary = json::parse(slurp(dir / "out" / "summary.json"));
  double order = summary["oracle"]["fitted_order"].get<double>();
  CHECK(order > 0.8);
  CHECK(order < 1.2);
}

TEST_CASE("cli: identities subcommand passes on builtins") {
  fs::path dir = scratch_dir("identities");
  write_file(dir / "cfg.json", R"({
    "model": {"name": "driven_oscillator"},
    "analysis": "identities",
    "identities": {"samples": 25},
    "seed": 42
  })");
  CliResult r = run_cli("identities --config " + (dir / "cfg.json").string() + " --out " +
                            (dir / "out").string(),
                        dir);
  CHECK(r.exit_code == 0);
  json summary = json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(summary["identities"]["pass"] == true);
  CHECK(summary["identities"]["route_equivalence_max_rel"].get<double>() < 1e-9);

  // --seed overrides the config value and shows up in the echo
  CliResult s = run_cli("identities --config " + (dir / "cfg.json").string() + " --out " +
                            (dir / "out2").string() + " --seed 43",
                        dir);
  CHECK(s.exit_code == 0);
  json summary2 = json::parse(slurp(dir / "out2" / "summary.json"));
  CHECK(summary2["config"]["seed"] == 43);
}

TEST_CASE("cli: lyapunov subcommand emits the convergence series") {
  fs::path dir = scratch_dir("lyapunov");
  write_file(dir / "cfg.json", R"({
    "model": {"name": "harmonic_oscillator"},
    "initial": {"q": [1.0], "qdot": [0.0]},
    "integrator": {"method": "rk4_fixed", "step": 0.02, "t_span": [0.0, 1.0]},
    "analysis": "lyapunov",
    "lyapunov": {"n_exponents": 2, "renorm_interval": 1.0, "t_total": 50.0}
  })");
  CliResult r = run_cli("lyapunov --config " + (dir / "cfg.json").string() + " --out " +
                            (dir / "out").string(),
                        dir);
  CHECK(r.exit_code == 0);
  std::string csv = slurp(dir / "out" / "trajectory.csv");
  CHECK(csv.rfind("t,lambda_0,lambda_1\n", 0) == 0);
  json summary = json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(std::abs(summary["lyapunov"]["exponents"][0].get<double>()) < 0.1);
}

TEST_CASE("cli: list-models prints the catalog") {
  fs::path dir = scratch_dir("list");
  CliResult r = run_cli("list-models", dir);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("kepler_polar") != std::string::npos);
  CHECK(r.out.find("ignorable") != std::string::npos);
  CHECK(r.out.find("driven_oscillator") != std::string::npos);
}
