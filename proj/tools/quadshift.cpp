// quadshift: run, verify, convergence and sweep over JSON scenario files.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "quadshift/quadshift.hpp"

namespace {

using quadshift::ExitCode;

int code(ExitCode c) { return static_cast<int>(c); }

int cmd_run(const std::string& config, const std::string& out) {
  const auto sc = quadshift::load_scenario(config);
  const auto result = quadshift::run_scenario(sc);
  quadshift::write_run(sc, result, out);
  const auto& last = result.evolution.series.back();
  std::printf("run: %zu steps, t=%.6g norm=%.12f <x>=%.6g <p>=%.6g var_x=%.6g var_p=%.6g\n",
              result.steps, last.t, last.norm, last.mean_x, last.mean_p, last.moments.var_x,
              last.moments.var_p);
  return code(ExitCode::ok);
}

int cmd_verify(const std::string& config, const std::string& out, double corrupt_beta) {
  const auto sc = quadshift::load_scenario(config);
  const auto report = quadshift::verify_scenario(sc, corrupt_beta);
  quadshift::write_verify(sc, report, out);
  const auto& s = report.summary;
  std::printf("position residual  %.3e (tol %.1e)\n", s.max_position_residual,
              report.tolerances.residual);
  std::printf("momentum residual  %.3e (tol %.1e)\n", s.max_momentum_residual,
              report.tolerances.residual);
  std::printf("moment delta       %.3e (tol %.1e)\n", s.max_moment_delta,
              report.tolerances.moment);
  std::printf("norm drift         %.3e (tol %.1e)\n", s.max_norm_drift, report.tolerances.norm);
  std::printf("verify: %s\n", report.passed() ? "PASS" : "FAIL");
  return code(report.passed() ? ExitCode::ok : ExitCode::verify_failed);
}

int cmd_convergence(const std::string& config, const std::string& out, int levels) {
  const auto sc = quadshift::load_scenario(config);
  const auto table = quadshift::convergence_study(sc, levels);
  quadshift::write_convergence(table, out);
  std::printf("%5s %12s %14s %10s\n", "level", "dt", "residual", "order");
  for (const auto& l : table) {
    std::string order = "-";
    if (l.level > 0) order = l.position_order ? quadshift::io::fmt(*l.position_order) : "floor";
    std::printf("%5d %12.4e %14.6e %10.10s\n", l.level, l.dt, l.position_residual, order.c_str());
  }
  return code(ExitCode::ok);
}

int cmd_sweep(const std::string& config, const std::string& overrides, const std::string& out,
              unsigned jobs) {
  const auto base = quadshift::load_json(config);
  const auto plan = quadshift::parse_sweep(quadshift::load_json(overrides, "overrides"));
  const auto manifest = quadshift::run_sweep(base, plan, out, jobs);
  std::size_t ok = 0;
  for (const auto& e : manifest.at("entries")) {
    std::printf("%-24s %s\n", e.at("name").get<std::string>().c_str(),
                e.at("status").get<std::string>().c_str());
    ok += e.at("status") == "ok";
  }
  std::printf("sweep: %zu/%zu ok\n", ok, plan.entries.size());
  return code(ExitCode::ok);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadratic-Hamiltonian wave packet runner"};
  app.require_subcommand(1);

  std::string config;
  std::string out = "out";
  int levels = 4;
  double corrupt_beta = 0.0;
  std::string overrides;
  unsigned jobs = 0;

  auto* run = app.add_subcommand("run", "Evolve a scenario and write series and snapshots");
  auto* verify = app.add_subcommand("verify", "Check the linear-term reduction against direct evolution");
  auto* conv = app.add_subcommand("convergence", "Repeat verify with dt halved per level");
  auto* sweep = app.add_subcommand("sweep", "Run patched copies of a template scenario");
  for (auto* sub : {run, verify, conv, sweep}) {
    sub->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory")->capture_default_str();
  }
  verify->add_option("--corrupt-beta", corrupt_beta, "Add this value to beta (debug)");
  conv->add_option("--levels", levels, "Number of dt levels (>= 3)")->capture_default_str();
  sweep->add_option("--overrides", overrides, "Overrides JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--jobs", jobs, "Worker threads (0 = hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : code(ExitCode::config_error);
  }

  try {
    if (*run) return cmd_run(config, out);
    if (*verify) return cmd_verify(config, out, corrupt_beta);
    if (*conv) return cmd_convergence(config, out, levels);
    return cmd_sweep(config, overrides, out, jobs);
  } catch (const quadshift::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return code(ExitCode::config_error);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return code(ExitCode::runtime_error);
  }
}
