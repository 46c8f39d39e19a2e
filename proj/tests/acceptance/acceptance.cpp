// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "quadshift/quadshift.hpp"

using namespace quadshift;

namespace {

constexpr double pi = std::numbers::pi;

int failures = 0;

void report(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %-44s %s\n", ok ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

Scenario family(const std::string& name) {
  return load_scenario(std::string(QUADSHIFT_CONFIGS) + "/" + name + ".json");
}

const std::vector<std::string> families = {"free_constant_g", "free_sinusoidal_g", "constant_f",
                                           "forced_oscillator", "general"};

struct FamilyRun {
  std::string name;
  Scenario scenario;
  std::vector<ConvergenceLevel> levels;
  std::string error;

  const VerifyReport& reference() const { return levels.front().report; }
};

// Second-order convergence, or a floor: both residuals of the pair at or below 1e-6.
bool converges(const std::vector<ConvergenceLevel>& levels, std::string& detail) {
  bool ok = true;
  for (std::size_t k = 1; k < levels.size(); ++k) {
    const double coarse = levels[k - 1].position_residual;
    const double fine = levels[k].position_residual;
    const double order = std::log2(coarse / fine);
    const bool at_order = std::abs(order - 2.0) <= 0.2;
    const bool at_floor = coarse <= 1e-6 && fine <= 1e-6;
    ok = ok && (at_order || at_floor);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%s", k > 1 ? "," : "",
                  at_order ? sci(order).c_str() : (at_floor ? "floor" : sci(order).c_str()));
    detail += buf;
  }
  return ok;
}

// Sample of a lattice-aligned series at time t; the final step may be shorter than dt.
template <class Series>
const auto& at_time(const Series& series, double t) {
  const auto it = std::min_element(series.begin(), series.end(), [t](const auto& a, const auto& b) {
    return std::abs(a.t - t) < std::abs(b.t - t);
  });
  return *it;
}

// Free Gaussian with hbar = a = 1: the packet of make_packet evolved exactly.
complex free_gaussian(double x, double t, double x0, double p0, double sigma) {
  const complex A(sigma * sigma, t);
  const complex z(sigma * sigma * p0, x - x0);
  return std::pow(sigma * sigma / pi, 0.25) / std::sqrt(A) *
         std::exp(z * z / (2.0 * A) - 0.5 * sigma * sigma * p0 * p0);
}

// Coherent state of the unit oscillator (a = c = 1, sigma = 1) displaced to (x0, p0).
complex coherent_state(double x, double t, double x0, double p0) {
  const double q = x0 * std::cos(t) + p0 * std::sin(t);
  const double p = p0 * std::cos(t) - x0 * std::sin(t);
  const double phase = p * (x - 0.5 * q) - 0.5 * t - 0.5 * p0 * x0;
  return std::pow(pi, -0.25) * std::exp(complex(-0.5 * (x - q) * (x - q), phase));
}

double analytic_residual(const WaveFunction& psi, auto&& exact) {
  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t j = 0; j < psi.amplitudes.size(); ++j) {
    const complex e = exact(psi.grid.x(j));
    diff += std::norm(psi.amplitudes[j] - e);
    ref += std::norm(e);
  }
  return std::sqrt(diff / ref);
}

CoefficientFunction random_force(std::mt19937_64& rng, double t0, double horizon) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> freq(0.2, 3.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * pi);
  Segment s;
  s.t_start = t0;
  for (int k = 0; k < 4; ++k) s.poly[k] = unit(rng) / std::pow(horizon, k);
  for (int k = 0; k < 2; ++k) s.sines.push_back({unit(rng), freq(rng), phase(rng)});
  return CoefficientFunction({s});
}

}  // namespace

int main() {
  std::vector<FamilyRun> runs;
  for (const auto& name : families) {
    FamilyRun run{name, family(name), {}, {}};
    try {
      run.levels = convergence_study(run.scenario, 3);
    } catch (const std::exception& e) {
      run.error = e.what();
    }
    std::printf("  %-18s", name.c_str());
    if (run.error.empty()) {
      const auto& s = run.reference().summary;
      std::printf(" pos %s  mom %s  moments %s  (%zu steps)\n",
                  sci(s.max_position_residual).c_str(), sci(s.max_momentum_residual).c_str(),
                  sci(s.max_moment_delta).c_str(), run.reference().steps);
    } else {
      std::printf(" error: %s\n", run.error.c_str());
    }
    runs.push_back(std::move(run));
  }

  auto over_families = [&](auto&& value) {
    double worst = 0.0;
    bool ok = true;
    for (const auto& r : runs) {
      if (!r.error.empty()) {
        ok = false;
        continue;
      }
      worst = std::max(worst, value(r));
    }
    return std::pair{ok, worst};
  };

  {
    auto [ok, worst] =
        over_families([](const FamilyRun& r) { return r.reference().summary.max_position_residual; });
    report(1, "theorem, position space", ok && worst <= 1e-4, "max " + sci(worst) + " <= 1e-04");
  }
  {
    auto [ok, worst] =
        over_families([](const FamilyRun& r) { return r.reference().summary.max_momentum_residual; });
    report(2, "theorem, momentum space", ok && worst <= 1e-4, "max " + sci(worst) + " <= 1e-04");
  }
  {
    bool ok = true;
    std::string detail;
    for (const auto& r : runs) {
      if (!r.error.empty()) {
        ok = false;
        continue;
      }
      std::string orders;
      ok = converges(r.levels, orders) && ok;
      detail += (detail.empty() ? "" : " ") + orders;
    }
    report(3, "residual convergence in dt", ok, "orders " + detail);
  }
  {
    auto [ok, worst] =
        over_families([](const FamilyRun& r) { return r.reference().summary.max_moment_delta; });
    report(4, "moments independent of linear terms", ok && worst <= 1e-8,
           "max " + sci(worst) + " <= 1e-08");
  }
  {
    double worst_moment = 0.0;
    double worst_ode_invariant = 0.0;
    double worst_wave_invariant = 0.0;
    bool ok = true;
    for (const auto& r : runs) {
      if (!r.error.empty()) {
        ok = false;
        continue;
      }
      const auto& w = r.scenario.time;
      const auto& recs = r.reference().records;
      const auto ode = evolve_second_moments(r.scenario.coefficients.quadratic(),
                                             recs.front().full.second(), w.t0, w.t_end, w.dt);
      const double ode_inv0 = symplectic_invariant(ode.front().moments);
      for (const auto& s : ode) {
        worst_ode_invariant = std::max(
            worst_ode_invariant, std::abs(symplectic_invariant(s.moments) / ode_inv0 - 1.0));
      }
      const double wave_inv0 = symplectic_invariant(recs.front().full.second());
      for (const auto& rec : recs) {
        const auto m = rec.full.second();
        const auto& o = at_time(ode, rec.t).moments;
        worst_moment = std::max({worst_moment, std::abs(m.var_x - o.var_x),
                                 std::abs(m.cov - o.cov), std::abs(m.var_p - o.var_p)});
        worst_wave_invariant =
            std::max(worst_wave_invariant, std::abs(symplectic_invariant(m) / wave_inv0 - 1.0));
      }
    }
    const double worst_invariant = std::max(worst_ode_invariant, worst_wave_invariant);
    report(5, "closed second-moment equations",
           ok && worst_moment <= 1e-5 && worst_invariant <= 1e-9,
           "moments " + sci(worst_moment) + " <= 1e-05, invariant drift ode " +
               sci(worst_ode_invariant) + " wave " + sci(worst_wave_invariant) + " <= 1e-09");
  }
  {
    auto [ok, worst] = over_families([](const FamilyRun& r) {
      const auto& w = r.scenario.time;
      const auto& recs = r.reference().records;
      const auto traj = integrate_trajectory(r.scenario.coefficients, recs.front().full.mean_x,
                                             recs.front().full.mean_p, w.t0, w.t_end, w.dt);
      double e = 0.0;
      for (const auto& rec : recs) {
        const auto& c = at_time(traj, rec.t);
        e = std::max({e, std::abs(rec.full.mean_x - c.x), std::abs(rec.full.mean_p - c.p)});
      }
      return e;
    });
    report(6, "Ehrenfest tracking of <x>, <p>", ok && worst <= 1e-5,
           "max " + sci(worst) + " <= 1e-05");
  }
  {
    double identity = 0.0;
    double closed = 0.0;
    bool ok = true;
    try {
      for (const auto& r : runs) {
        for (const auto& s : integrate_shift(r.scenario.coefficients, r.scenario.time.t_end,
                                             r.scenario.time.dt)) {
          identity = std::max(identity, std::abs(s.beta + s.gamma - s.p_bar * s.x_bar));
        }
      }
      std::mt19937_64 rng(20240607);
      std::uniform_real_distribution<double> start(-1.0, 1.0);
      std::uniform_real_distribution<double> span(1.0, 5.0);
      std::uniform_real_distribution<double> mass_dist(0.5, 2.0);
      std::uniform_real_distribution<double> omega_dist(0.5, 2.0);
      const double dt = 1e-3;
      for (int trial = 0; trial < 20; ++trial) {
        const double t0 = start(rng);
        const double horizon = span(rng);
        const double mass = mass_dist(rng);
        const double omega = omega_dist(rng);
        const auto g = random_force(rng, t0, horizon);
        CoefficientSet k;
        k.a = CoefficientFunction::constant(1.0 / mass, t0);
        k.g = g;
        k.t0 = t0;
        CoefficientSet osc = k;
        osc.c = CoefficientFunction::constant(mass * omega * omega, t0);
        const auto free_series = integrate_shift(k, t0 + horizon, dt);
        const auto osc_series = integrate_shift(osc, t0 + horizon, dt);
        for (const auto* series : {&free_series, &osc_series}) {
          for (const auto& s : *series) {
            identity = std::max(identity, std::abs(s.beta + s.gamma - s.p_bar * s.x_bar));
          }
        }
        for (std::size_t i = 1; i <= 4; ++i) {
          const std::size_t idx = i * (free_series.size() - 1) / 4;
          const auto& a = free_series[idx];
          const auto e1 = example1_shift(g, mass, t0, a.t);
          closed = std::max({closed, std::abs(a.x_bar - e1.x_bar), std::abs(a.p_bar - e1.p_bar),
                             std::abs(a.beta - e1.beta)});
          const auto& b = osc_series[idx];
          const auto e2 = example2_shift(g, mass, omega, t0, b.t);
          closed = std::max({closed, std::abs(b.x_bar - e2.x_bar), std::abs(b.p_bar - e2.p_bar),
                             std::abs(b.beta - e2.beta)});
        }
      }
    } catch (const std::exception& e) {
      std::printf("  error: %s\n", e.what());
      ok = false;
    }
    report(7, "phase identities and closed forms", ok && identity <= 1e-10 && closed <= 1e-9,
           "beta+gamma-p x " + sci(identity) + " <= 1e-10, closed forms " + sci(closed) +
               " <= 1e-09");
  }
  {
    double drift = 0.0;
    bool ok = true;
    std::string detail;
    for (Scheme scheme : {Scheme::exponential_midpoint, Scheme::crank_nicolson}) {
      Scenario sc = family("forced_oscillator");
      sc.time.t_end = 10.0;
      sc.time.output_stride = 100;
      sc.outputs.snapshots.clear();
      sc.discretization.scheme = scheme;
      try {
        const auto result = run_scenario(sc);
        double d = 0.0;
        for (const auto& o : result.evolution.series) d = std::max(d, std::abs(o.norm - 1.0));
        drift = std::max(drift, d);
        detail += std::string(detail.empty() ? "" : ", ") + to_string(scheme) + " " + sci(d) +
                  " over " + std::to_string(result.steps) + " steps";
        ok = ok && result.steps >= 10000;
      } catch (const std::exception& e) {
        detail += std::string(" error: ") + e.what();
        ok = false;
      }
    }
    report(8, "unitarity over 1e4 steps", ok && drift <= 1e-9, detail + " <= 1e-09");
  }
  {
    double residual = 0.0;
    bool failed = false;
    try {
      const Scenario sc = family("free_constant_g");
      const auto r = verify_scenario(sc, pi * sc.params.hbar);
      residual = r.summary.max_position_residual;
      failed = !r.passed();
    } catch (const std::exception& e) {
      std::printf("  error: %s\n", e.what());
    }
    report(9, "negative control, beta + pi hbar", std::abs(residual - 2.0) <= 1e-3 && failed,
           "residual " + sci(residual) + " = 2 +- 1e-03, verify " + (failed ? "fails" : "passes"));
  }
  {
    double var_error = 0.0;
    double wave_error = 0.0;
    bool ok = true;
    try {
      Scenario sc = family("free_gaussian");
      sc.packet = {0.5, 1.0, 1.0, 0, 0.0};
      sc.outputs.snapshots = {0.25, 0.5, 0.75, 1.0};
      const auto free = run_scenario(sc);
      const double s2 = sc.packet.sigma * sc.packet.sigma;
      for (const auto& o : free.evolution.series) {
        const double exact = 0.5 * s2 + 0.5 * o.t * o.t / s2;
        var_error = std::max(var_error, std::abs(o.moments.var_x - exact));
      }
      for (const auto& psi : free.evolution.snapshots) {
        wave_error = std::max(wave_error, analytic_residual(psi, [&](double x) {
                                return free_gaussian(x, psi.t, 0.5, 1.0, 1.0);
                              }));
      }

      Scenario osc = family("free_gaussian");
      osc.coefficients.c = CoefficientFunction::constant(1.0, 0.0);
      osc.packet = {2.0, 0.5, 1.0, 0, 0.0};
      osc.time.t_end = 2.0 * pi;
      osc.time.output_stride = 100;
      osc.outputs.snapshots = {pi / 3.0, pi, 1.5 * pi, 2.0 * pi};
      const auto coherent = run_scenario(osc);
      for (const auto& o : coherent.evolution.series) {
        var_error = std::max({var_error, std::abs(o.moments.var_x - 0.5),
                              std::abs(o.moments.var_p - 0.5), std::abs(o.moments.cov),
                              std::abs(o.mean_x - (2.0 * std::cos(o.t) + 0.5 * std::sin(o.t))),
                              std::abs(o.mean_p - (0.5 * std::cos(o.t) - 2.0 * std::sin(o.t)))});
      }
      for (const auto& psi : coherent.evolution.snapshots) {
        wave_error = std::max(wave_error, analytic_residual(psi, [&](double x) {
                                return coherent_state(x, psi.t, 2.0, 0.5);
                              }));
      }
    } catch (const std::exception& e) {
      std::printf("  error: %s\n", e.what());
      ok = false;
    }
    report(10, "analytic free and coherent packets", ok && var_error <= 1e-5 && wave_error <= 1e-5,
           "moments " + sci(var_error) + ", wave function " + sci(wave_error) + " <= 1e-05");
  }

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
