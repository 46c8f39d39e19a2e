#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "quadshift/classical.hpp"
#include "quadshift/errors.hpp"
#include "quadshift/moments.hpp"
#include "quadshift/propagator.hpp"
#include "quadshift/scenario.hpp"
#include "quadshift/transform.hpp"

namespace quadshift {

namespace fs = std::filesystem;

namespace io {

/// Full-precision decimal (17 significant digits).
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Shortest round-trip decimal, used in file names.
inline std::string label(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::ofstream open(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

inline void write_json(const fs::path& path, const json& doc) {
  auto out = open(path);
  out << doc.dump(2) << '\n';
}

inline void write_series(const fs::path& path, std::span<const Observation> series) {
  auto out = open(path);
  out << "t,norm,mean_x,mean_p,var_x,cov,var_p,leak\n";
  for (const auto& o : series) {
    out << fmt(o.t) << ',' << fmt(o.norm) << ',' << fmt(o.mean_x) << ',' << fmt(o.mean_p) << ','
        << fmt(o.moments.var_x) << ',' << fmt(o.moments.cov) << ',' << fmt(o.moments.var_p)
        << ',' << fmt(o.leak) << '\n';
  }
}

inline void write_wave(const fs::path& path, const WaveFunction& psi,
                       const PhysicalParams& params) {
  auto out = open(path);
  out << (psi.representation == Representation::position ? "x" : "p") << ",re,im\n";
  for (std::size_t j = 0; j < psi.amplitudes.size(); ++j) {
    out << fmt(psi.coordinate(j, params)) << ',' << fmt(psi.amplitudes[j].real()) << ','
        << fmt(psi.amplitudes[j].imag()) << '\n';
  }
}

inline json observation_json(const Observation& o) {
  return {{"t", o.t},
          {"norm", o.norm},
          {"mean_x", o.mean_x},
          {"mean_p", o.mean_p},
          {"var_x", o.moments.var_x},
          {"cov", o.moments.cov},
          {"cov_symmetrized", o.moments.cov_symmetrized()},
          {"var_p", o.moments.var_p},
          {"leak", o.leak}};
}

}  // namespace io

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunResult {
  Evolution evolution;
  std::size_t steps = 0;
  double runtime_seconds = 0.0;
};

inline RunResult run_scenario(const Scenario& sc) {
  const auto start = std::chrono::steady_clock::now();
  const WaveFunction initial = make_packet(sc.packet, sc.grid, sc.params, sc.time.t0);
  RunResult out{evolve(sc.coefficients, initial, sc.evolve_options(), sc.params)};
  out.steps = time_lattice(sc.time.t0, sc.time.t_end, sc.time.dt).size() - 1;
  out.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// series.csv, snapshots/psi_<t>.csv and summary.json.
inline void write_run(const Scenario& sc, const RunResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  if (sc.outputs.series) io::write_series(dir / "series.csv", result.evolution.series);
  for (std::size_t s = 0; s < sc.outputs.snapshots.size(); ++s) {
    io::write_wave(dir / "snapshots" / ("psi_" + io::label(sc.outputs.snapshots[s]) + ".csv"),
                   result.evolution.snapshots[s], sc.params);
  }
  json snapshots = json::array();
  for (std::size_t s = 0; s < sc.outputs.snapshots.size(); ++s) {
    snapshots.push_back({{"requested", sc.outputs.snapshots[s]},
                         {"t", result.evolution.snapshots[s].t},
                         {"file", "snapshots/psi_" + io::label(sc.outputs.snapshots[s]) + ".csv"}});
  }
  io::write_json(dir / "summary.json",
                 {{"command", "run"},
                  {"scenario", to_json(sc)},
                  {"steps", result.steps},
                  {"runtime_seconds", result.runtime_seconds},
                  {"snapshots", snapshots},
                  {"final", io::observation_json(result.evolution.series.back())}});
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct MomentDeltas {
  std::vector<double> position;  // index k: order k + 2
  std::vector<double> momentum;
  double cov = 0.0;

  double max() const {
    double m = std::abs(cov);
    for (double d : position) m = std::max(m, std::abs(d));
    for (double d : momentum) m = std::max(m, std::abs(d));
    return m;
  }
};

struct VerifyRecord {
  double t = 0.0;
  std::optional<ResidualReport> position;
  std::optional<ResidualReport> momentum;
  MomentDeltas deltas;
  MomentProfile full;
  MomentProfile reduced;
  ShiftState shift;
  double mean_x_error = 0.0;  // <x>_full - (<x>_reduced + x_bar)
  double mean_p_error = 0.0;  // <p>_full - (<p>_reduced + p_bar)
  double leak_full = 0.0;
  double leak_reduced = 0.0;
};

struct VerifySummary {
  double max_position_residual = 0.0;
  double max_momentum_residual = 0.0;
  double max_moment_delta = 0.0;
  double max_norm_drift = 0.0;
  double max_leak = 0.0;
};

struct VerifyReport {
  std::vector<VerifyRecord> records;
  VerifySummary summary;
  Tolerances tolerances;
  double corrupt_beta = 0.0;
  std::size_t steps = 0;
  double runtime_seconds = 0.0;

  bool passed() const {
    return summary.max_position_residual <= tolerances.residual &&
           summary.max_momentum_residual <= tolerances.residual &&
           summary.max_moment_delta <= tolerances.moment &&
           summary.max_norm_drift <= tolerances.norm;
  }
};

/// Evolves the full and the linear-term-free Hamiltonians side by side,
/// integrates the shift, and compares at every output stride. `corrupt_beta`
/// is added to beta before the comparison (negative control).
inline VerifyReport verify_scenario(const Scenario& sc, double corrupt_beta = 0.0) {
  if (!sc.coefficients.has_linear_terms()) {
    throw ConfigError("coefficients", "verify requires linear terms (nonzero f or g)");
  }
  const auto start = std::chrono::steady_clock::now();
  const CoefficientSet& full_h = sc.coefficients;
  const CoefficientSet reduced_h = strip_linear(full_h);
  const auto shifts = integrate_shift(full_h, sc.time.t_end, sc.time.dt);
  const auto times = time_lattice(sc.time.t0, sc.time.t_end, sc.time.dt);

  VerifyReport report;
  report.tolerances = sc.tolerances;
  report.corrupt_beta = corrupt_beta;
  report.steps = times.size() - 1;

  WaveFunction full = make_packet(sc.packet, sc.grid, sc.params, sc.time.t0);
  WaveFunction reduced = full;
  auto& sum = report.summary;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (k > 0) {
      const double dt = times[k] - times[k - 1];
      full = propagate_step(full, full_h, dt, sc.params, sc.discretization);
      reduced = propagate_step(reduced, reduced_h, dt, sc.params, sc.discretization);
      full.t = reduced.t = times[k];
    }
    VerifyRecord rec;
    rec.t = times[k];
    rec.leak_full = boundary_leak(full);
    rec.leak_reduced = boundary_leak(reduced);
    const double leak = std::max(rec.leak_full, rec.leak_reduced);
    if (leak > sc.tolerances.leak) throw BoundaryLeak(times[k], leak);
    sum.max_leak = std::max(sum.max_leak, leak);
    if (k % sc.time.output_stride != 0 && k + 1 != times.size()) continue;

    rec.shift = shifts[k];
    rec.shift.beta += corrupt_beta;
    rec.shift.gamma -= corrupt_beta;
    if (sc.outputs.verify_position) {
      rec.position = theorem_residual(full, reduced, rec.shift, sc.params,
                                      Representation::position);
      sum.max_position_residual = std::max(sum.max_position_residual, rec.position->l2_residual);
    }
    if (sc.outputs.verify_momentum) {
      rec.momentum = theorem_residual(full, reduced, rec.shift, sc.params,
                                      Representation::momentum);
      sum.max_momentum_residual = std::max(sum.max_momentum_residual, rec.momentum->l2_residual);
    }
    rec.full = moment_profile(full, sc.params, sc.outputs.max_moment_order);
    rec.reduced = moment_profile(reduced, sc.params, sc.outputs.max_moment_order);
    for (std::size_t i = 0; i < rec.full.position.size(); ++i) {
      rec.deltas.position.push_back(rec.full.position[i] - rec.reduced.position[i]);
      rec.deltas.momentum.push_back(rec.full.momentum[i] - rec.reduced.momentum[i]);
    }
    rec.deltas.cov = rec.full.cov - rec.reduced.cov;
    rec.mean_x_error = rec.full.mean_x - (rec.reduced.mean_x + rec.shift.x_bar);
    rec.mean_p_error = rec.full.mean_p - (rec.reduced.mean_p + rec.shift.p_bar);
    sum.max_moment_delta = std::max(sum.max_moment_delta, rec.deltas.max());
    sum.max_norm_drift = std::max({sum.max_norm_drift, std::abs(rec.full.norm - 1.0),
                                   std::abs(rec.reduced.norm - 1.0)});
    report.records.push_back(std::move(rec));
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline json to_json(const VerifyReport& r, const Scenario& sc) {
  auto residual = [](const std::optional<ResidualReport>& rr) -> json {
    if (!rr) return nullptr;
    return {{"l2", rr->l2_residual}, {"max_pointwise", rr->max_pointwise}};
  };
  json records = json::array();
  for (const auto& rec : r.records) {
    records.push_back(
        {{"t", rec.t},
         {"position_residual", residual(rec.position)},
         {"momentum_residual", residual(rec.momentum)},
         {"moment_deltas",
          {{"position", rec.deltas.position},
           {"momentum", rec.deltas.momentum},
           {"cov", rec.deltas.cov},
           {"cov_symmetrized", 2.0 * rec.deltas.cov},
           {"max_abs", rec.deltas.max()}}},
         {"full",
          {{"norm", rec.full.norm},
           {"mean_x", rec.full.mean_x},
           {"mean_p", rec.full.mean_p},
           {"cov", rec.full.cov},
           {"cov_symmetrized", 2.0 * rec.full.cov},
           {"position_moments", rec.full.position},
           {"momentum_moments", rec.full.momentum},
           {"leak", rec.leak_full}}},
         {"reduced",
          {{"norm", rec.reduced.norm},
           {"mean_x", rec.reduced.mean_x},
           {"mean_p", rec.reduced.mean_p},
           {"cov", rec.reduced.cov},
           {"cov_symmetrized", 2.0 * rec.reduced.cov},
           {"position_moments", rec.reduced.position},
           {"momentum_moments", rec.reduced.momentum},
           {"leak", rec.leak_reduced}}},
         {"shift",
          {{"x_bar", rec.shift.x_bar},
           {"p_bar", rec.shift.p_bar},
           {"beta", rec.shift.beta},
           {"gamma", rec.shift.gamma}}},
         {"mean_x_error", rec.mean_x_error},
         {"mean_p_error", rec.mean_p_error}});
  }
  const auto& s = r.summary;
  return {
      {"command", "verify"},
      {"scenario", to_json(sc)},
      {"conventions",
       {{"transform", "psi(x,t) = exp[i(p_bar x - beta)/hbar] Psi(x - x_bar, t)"},
        {"momentum_transform", "phi(p,t) = exp[-i(x_bar p - gamma)/hbar] Phi(p - p_bar, t)"},
        {"cov", "(1/2)<PX + XP>; cov_symmetrized = <PX + XP>"},
        {"residual", "||expected - actual|| / ||expected||, no phase alignment"},
        {"moment_delta", "absolute difference full - reduced of centered moments"}}},
      {"corrupt_beta", r.corrupt_beta},
      {"tolerances",
       {{"residual", r.tolerances.residual},
        {"moment", r.tolerances.moment},
        {"norm", r.tolerances.norm},
        {"leak", r.tolerances.leak}}},
      {"summary",
       {{"max_position_residual", s.max_position_residual},
        {"max_momentum_residual", s.max_momentum_residual},
        {"max_moment_delta", s.max_moment_delta},
        {"max_norm_drift", s.max_norm_drift},
        {"max_leak", s.max_leak}}},
      {"pass", r.passed()},
      {"steps", r.steps},
      {"runtime_seconds", r.runtime_seconds},
      {"records", records},
  };
}

inline void write_verify(const Scenario& sc, const VerifyReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  io::write_json(dir / "verify.json", to_json(report, sc));
}

// ---------------------------------------------------------------------------
// convergence
// ---------------------------------------------------------------------------

/// Residuals below this are treated as round-off; their order is not reported.
inline constexpr double residual_floor = 1e-10;

struct ConvergenceLevel {
  int level = 0;
  double dt = 0.0;
  std::size_t steps = 0;
  double position_residual = 0.0;
  double momentum_residual = 0.0;
  std::optional<double> position_order;  // empty for level 0 or at the floor
  std::optional<double> momentum_order;
  VerifyReport report;
};

inline std::optional<double> observed_order(double coarse, double fine) {
  if (coarse <= residual_floor || fine <= residual_floor) return std::nullopt;
  return std::log2(coarse / fine);
}

/// Reruns verify with dt halved per level on a fixed grid. Residuals are
/// compared at the same physical times on every level.
inline std::vector<ConvergenceLevel> convergence_study(const Scenario& sc, int levels) {
  if (levels < 3) throw ConfigError("levels", "must be >= 3");
  std::vector<ConvergenceLevel> out;
  for (int k = 0; k < levels; ++k) {
    Scenario s = sc;
    s.time.dt = sc.time.dt / std::ldexp(1.0, k);
    s.time.output_stride = sc.time.output_stride << k;
    s.outputs.verify_position = s.outputs.verify_momentum = true;
    auto report = verify_scenario(s);
    ConvergenceLevel lvl;
    lvl.level = k;
    lvl.dt = s.time.dt;
    lvl.steps = report.steps;
    lvl.position_residual = report.summary.max_position_residual;
    lvl.momentum_residual = report.summary.max_momentum_residual;
    if (k > 0) {
      lvl.position_order = observed_order(out.back().position_residual, lvl.position_residual);
      lvl.momentum_order = observed_order(out.back().momentum_residual, lvl.momentum_residual);
    }
    lvl.report = std::move(report);
    out.push_back(std::move(lvl));
  }
  return out;
}

inline void write_convergence(std::span<const ConvergenceLevel> levels, const fs::path& dir) {
  auto order = [](int level, const std::optional<double>& p) {
    if (level == 0) return std::string();
    return p ? io::fmt(*p) : std::string("floor");
  };
  auto out = io::open(dir / "convergence.csv");
  out << "level,dt,steps,position_residual,momentum_residual,position_order,momentum_order\n";
  for (const auto& l : levels) {
    out << l.level << ',' << io::fmt(l.dt) << ',' << l.steps << ',' << io::fmt(l.position_residual)
        << ',' << io::fmt(l.momentum_residual) << ',' << order(l.level, l.position_order) << ','
        << order(l.level, l.momentum_order) << '\n';
  }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepEntry {
  std::string name;
  json patch;
};

struct SweepPlan {
  std::string command = "run";  // run | verify
  std::vector<SweepEntry> entries;
};

inline bool safe_name(const std::string& name) {
  if (name.empty() || name == "." || name == "..") return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

/// Accepts either a bare array of {name, patch} or {command, runs: [...]}.
/// Names must be unique and usable as directory names.
inline SweepPlan parse_sweep(const json& doc) {
  SweepPlan plan;
  const json* runs = &doc;
  if (doc.is_object()) {
    config::reject_unknown(doc, "overrides", {"command", "runs"});
    if (doc.contains("command")) {
      if (!doc.at("command").is_string()) {
        throw ConfigError("overrides.command", "expected a string");
      }
      plan.command = doc.at("command").get<std::string>();
      if (plan.command != "run" && plan.command != "verify") {
        throw ConfigError("overrides.command", "expected run or verify");
      }
    }
    if (!doc.contains("runs")) throw ConfigError("overrides.runs", "required field is missing");
    runs = &doc.at("runs");
  }
  if (!runs->is_array()) throw ConfigError("overrides.runs", "expected an array of patches");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < runs->size(); ++i) {
    const std::string where = "overrides.runs[" + std::to_string(i) + "]";
    const auto& r = (*runs)[i];
    config::reject_unknown(r, where, {"name", "patch"});
    if (!r.contains("name") || !r.at("name").is_string()) {
      throw ConfigError(where + ".name", "expected a string");
    }
    const std::string name = r.at("name").get<std::string>();
    if (!safe_name(name)) {
      throw ConfigError(where + ".name", "'" + name + "' is not a valid directory name");
    }
    if (!seen.insert(name).second) {
      throw ConfigError(where + ".name", "duplicate output name '" + name + "'");
    }
    const json patch = r.value("patch", json::object());
    if (!patch.is_object()) throw ConfigError(where + ".patch", "expected an object");
    plan.entries.push_back({name, patch});
  }
  return plan;
}

enum class ExitCode { ok = 0, verify_failed = 1, config_error = 2, runtime_error = 3 };

struct SweepOutcome {
  std::string name;
  std::string status;  // ok | fail | config-error | runtime-error
  ExitCode code = ExitCode::ok;
  std::string error;
  json result;
};

/// Applies `entry.patch` (JSON merge patch) to the template, runs it into
/// `dir`, and classifies the outcome. Never throws for scenario errors.
inline SweepOutcome run_sweep_entry(const json& base, const SweepEntry& entry,
                                    const std::string& command, const fs::path& dir) {
  SweepOutcome out;
  out.name = entry.name;
  out.status = "ok";
  try {
    json doc = base;
    doc.merge_patch(entry.patch);
    if (!doc.contains("name")) doc["name"] = entry.name;
    const Scenario sc = parse_scenario(doc);
    if (command == "verify") {
      const auto report = verify_scenario(sc);
      write_verify(sc, report, dir);
      out.result = {{"pass", report.passed()},
                    {"max_position_residual", report.summary.max_position_residual},
                    {"max_momentum_residual", report.summary.max_momentum_residual},
                    {"max_moment_delta", report.summary.max_moment_delta}};
      if (!report.passed()) {
        out.status = "fail";
        out.code = ExitCode::verify_failed;
      }
    } else {
      const auto result = run_scenario(sc);
      write_run(sc, result, dir);
      out.result = {{"final", io::observation_json(result.evolution.series.back())}};
    }
  } catch (const ConfigError& e) {
    out.status = "config-error";
    out.code = ExitCode::config_error;
    out.error = e.what();
  } catch (const std::exception& e) {
    out.status = "runtime-error";
    out.code = ExitCode::runtime_error;
    out.error = e.what();
  }
  return out;
}

/// Runs every entry in its own directory under `root` on up to `workers`
/// threads and writes manifest.json in plan order.
inline json run_sweep(const json& base, const SweepPlan& plan, const fs::path& root,
                      unsigned workers = 0) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, std::max<std::size_t>(1, plan.entries.size()));
  fs::create_directories(root);
  std::vector<SweepOutcome> outcomes(plan.entries.size());
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < plan.entries.size(); i = next++) {
          outcomes[i] =
              run_sweep_entry(base, plan.entries[i], plan.command, root / plan.entries[i].name);
        }
      });
    }
  }
  json entries = json::array();
  for (const auto& o : outcomes) {
    json e = {{"name", o.name},
              {"directory", o.name},
              {"status", o.status},
              {"exit_code", static_cast<int>(o.code)}};
    if (!o.error.empty()) e["error"] = o.error;
    if (!o.result.is_null()) e["result"] = o.result;
    entries.push_back(e);
  }
  json manifest = {{"command", plan.command}, {"count", outcomes.size()}, {"entries", entries}};
  io::write_json(root / "manifest.json", manifest);
  return manifest;
}

}  // namespace quadshift
