#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadshift/errors.hpp"
#include "quadshift/model.hpp"
#include "quadshift/quadrature.hpp"

namespace quadshift {

/// Sample times t_start, t_start + dt, ... ending exactly at t_end; the last
/// step is shortened when (t_end - t_start) is not a multiple of dt. Times are
/// computed as t_start + k*dt, never accumulated, so independent pipelines
/// using the same (t_start, t_end, dt) see bit-identical times.
inline std::vector<double> time_lattice(double t_start, double t_end, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be > 0");
  if (!(t_end >= t_start)) throw std::invalid_argument("t_end must be >= t_start");
  const double ratio = (t_end - t_start) / dt;
  const auto steps = static_cast<std::size_t>(std::ceil(ratio - 1e-9));
  std::vector<double> times;
  times.reserve(steps + 1);
  for (std::size_t k = 0; k < steps; ++k) times.push_back(t_start + static_cast<double>(k) * dt);
  times.push_back(t_end);
  return times;
}

template <std::size_t N>
using StateVector = std::array<double, N>;

/// One classic fourth-order Runge-Kutta step of y' = rhs(t, y).
template <std::size_t N, class Rhs>
StateVector<N> rk4_step(const Rhs& rhs, double t, const StateVector<N>& y, double h) {
  auto axpy = [](const StateVector<N>& base, const StateVector<N>& k, double s) {
    StateVector<N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = base[i] + s * k[i];
    return out;
  };
  const StateVector<N> k1 = rhs(t, y);
  const StateVector<N> k2 = rhs(t + 0.5 * h, axpy(y, k1, 0.5 * h));
  const StateVector<N> k3 = rhs(t + 0.5 * h, axpy(y, k2, 0.5 * h));
  const StateVector<N> k4 = rhs(t + h, axpy(y, k3, h));
  StateVector<N> out;
  for (std::size_t i = 0; i < N; ++i) {
    out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

template <std::size_t N>
void require_finite(const StateVector<N>& y, double t) {
  for (double v : y) {
    if (!std::isfinite(v)) {
      throw NonFiniteState("integrator produced a non-finite value at t=" + std::to_string(t) +
                           "; reduce dt");
    }
  }
}

struct ClassicalState {
  double x = 0.0;
  double p = 0.0;
  double t = 0.0;
};

/// dx/dt = a p + b x + f,  dp/dt = -(b p + c x + g)
inline StateVector<2> classical_rhs(const CoefficientSet& k, double t, double x, double p) {
  const double b = k.b(t);
  return {k.a(t) * p + b * x + k.f(t), -(b * p + k.c(t) * x + k.g(t))};
}

inline std::vector<ClassicalState> integrate_trajectory(const CoefficientSet& coeffs, double x0,
                                                        double p0, double t_start, double t_end,
                                                        double dt) {
  const auto times = time_lattice(t_start, t_end, dt);
  auto rhs = [&](double t, const StateVector<2>& y) { return classical_rhs(coeffs, t, y[0], y[1]); };
  std::vector<ClassicalState> out;
  out.reserve(times.size());
  StateVector<2> y{x0, p0};
  out.push_back({x0, p0, times.front()});
  for (std::size_t k = 1; k < times.size(); ++k) {
    y = rk4_step(rhs, times[k - 1], y, times[k] - times[k - 1]);
    require_finite(y, times[k]);
    out.push_back({y[0], y[1], times[k]});
  }
  return out;
}

/// Displacement (x_bar, p_bar) imposed by the linear terms, plus the phase
/// accumulators of the position-space (beta) and momentum-space (gamma) forms.
struct ShiftState {
  double x_bar = 0.0;
  double p_bar = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double t = 0.0;
};

struct BetaCrossCheck {
  double max_discrepancy = 0.0;
  double tolerance = 0.0;
  bool ok() const { return max_discrepancy <= tolerance; }
};

/// Compares the integrated beta against beta = p_bar x_bar / 2 + (1/2) int (f p_bar + g x_bar),
/// with the integral taken by the trapezoid rule over the samples. The tolerance is
/// 100x the trapezoid error, estimated by Richardson against the every-other-sample rule.
inline BetaCrossCheck beta_cross_check(std::span<const ShiftState> series,
                                       const CoefficientSet& coeffs) {
  BetaCrossCheck out;
  if (series.size() < 2) return out;
  std::vector<double> h(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    h[i] = coeffs.f(s.t) * s.p_bar + coeffs.g(s.t) * s.x_bar;
  }
  std::vector<double> fine(series.size(), 0.0);
  for (std::size_t i = 1; i < series.size(); ++i) {
    fine[i] = fine[i - 1] + 0.5 * (series[i].t - series[i - 1].t) * (h[i] + h[i - 1]);
  }

  double error_estimate = 0.0;
  if (series.size() >= 5) {
    double coarse = 0.0;
    std::size_t prev = 0;
    auto visit = [&](std::size_t i) {
      coarse += 0.5 * (series[i].t - series[prev].t) * (h[i] + h[prev]);
      prev = i;
      error_estimate = std::max(error_estimate, std::abs(fine[i] - coarse) / 3.0);
    };
    for (std::size_t i = 2; i < series.size(); i += 2) visit(i);
    if (prev != series.size() - 1) visit(series.size() - 1);
  } else {
    for (std::size_t i = 1; i < series.size(); ++i) {
      error_estimate += (series[i].t - series[i - 1].t) * std::abs(h[i] - h[i - 1]);
    }
  }

  double scale = 1.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const double beta_integral = 0.5 * s.p_bar * s.x_bar + 0.5 * fine[i];
    out.max_discrepancy = std::max(out.max_discrepancy, std::abs(beta_integral - s.beta));
    scale = std::max({scale, std::abs(s.beta), std::abs(s.p_bar * s.x_bar)});
  }
  out.tolerance = 100.0 * (0.5 * error_estimate + 1e-12 * scale);
  return out;
}

/// RK4 on (x_bar, p_bar, beta) from zero at coeffs.t0 with
/// beta' = a p_bar^2 / 2 - c x_bar^2 / 2 + f p_bar; gamma = p_bar x_bar - beta.
inline std::vector<ShiftState> integrate_shift(const CoefficientSet& coeffs, double t_end,
                                               double dt) {
  const auto times = time_lattice(coeffs.t0, t_end, dt);
  auto rhs = [&](double t, const StateVector<3>& y) {
    const double a = coeffs.a(t);
    const double c = coeffs.c(t);
    const double f = coeffs.f(t);
    const auto xp = classical_rhs(coeffs, t, y[0], y[1]);
    return StateVector<3>{xp[0], xp[1], 0.5 * a * y[1] * y[1] - 0.5 * c * y[0] * y[0] + f * y[1]};
  };
  std::vector<ShiftState> out;
  out.reserve(times.size());
  StateVector<3> y{0.0, 0.0, 0.0};
  out.push_back({0.0, 0.0, 0.0, 0.0, times.front()});
  for (std::size_t k = 1; k < times.size(); ++k) {
    y = rk4_step(rhs, times[k - 1], y, times[k] - times[k - 1]);
    require_finite(y, times[k]);
    out.push_back({y[0], y[1], y[2], y[1] * y[0] - y[2], times[k]});
  }

  const auto check = beta_cross_check(out, coeffs);
  if (!check.ok()) {
    throw CrossCheckFailure("phase accumulator: differential and integral forms differ by " +
                            std::to_string(check.max_discrepancy) + " (tolerance " +
                            std::to_string(check.tolerance) + ")");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed forms for a uniform force (force = -g) on a particle of mass m
// ---------------------------------------------------------------------------

struct ClosedFormShift {
  double x_bar = 0.0;
  double p_bar = 0.0;
  double beta = 0.0;
};

/// Free particle: with G = int g, G1 = int G, G2 = int G^2 (all from t0),
/// x_bar = -G1/m, p_bar = -G, beta = G2/(2m).
inline ClosedFormShift example1_shift(const CoefficientFunction& g, double mass, double t0,
                                      double t, const QuadratureOptions& opts = {}) {
  if (!(mass > 0.0)) throw std::invalid_argument("mass must be > 0");
  if (!(t >= t0)) throw std::invalid_argument("t must be >= t0");
  const auto cuts = g.breakpoints();
  const auto inner = nested_options(opts, t - t0);
  auto G = [&](double s) { return integrate([&](double u) { return g(u); }, t0, s, cuts, inner); };
  const double G_t = G(t);
  const double G1 = integrate(G, t0, t, cuts, opts);
  const double G2 = integrate([&](double s) { const double v = G(s); return v * v; }, t0, t, cuts,
                              opts);
  return {-G1 / mass, -G_t, G2 / (2.0 * mass)};
}

/// Oscillator of frequency omega: with S = int g(t') sin w(t - t'), C = int g(t') cos w(t - t'),
/// x_bar = -S/(m w), p_bar = -C, beta = (S C - int g S)/(2 m w).
inline ClosedFormShift example2_shift(const CoefficientFunction& g, double mass, double omega,
                                      double t0, double t, const QuadratureOptions& opts = {}) {
  if (!(mass > 0.0)) throw std::invalid_argument("mass must be > 0");
  if (!(omega > 0.0)) throw std::invalid_argument("omega must be > 0");
  if (!(t >= t0)) throw std::invalid_argument("t must be >= t0");
  const auto cuts = g.breakpoints();
  const auto inner = nested_options(opts, t - t0);
  auto S = [&](double s) {
    return integrate([&](double u) { return g(u) * std::sin(omega * (s - u)); }, t0, s, cuts,
                     inner);
  };
  const double S_t = S(t);
  const double C_t =
      integrate([&](double u) { return g(u) * std::cos(omega * (t - u)); }, t0, t, cuts, opts);
  const double gS = integrate([&](double s) { return g(s) * S(s); }, t0, t, cuts, opts);
  const double mw = mass * omega;
  return {-S_t / mw, -C_t, (S_t * C_t - gS) / (2.0 * mw)};
}

}  // namespace quadshift
