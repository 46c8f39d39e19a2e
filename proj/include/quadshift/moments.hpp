#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadshift/classical.hpp"
#include "quadshift/errors.hpp"
#include "quadshift/model.hpp"
#include "quadshift/representation.hpp"

namespace quadshift {

/// Second central moments. `cov` is the half-symmetrized covariance
/// (1/2)<PX + XP> with X = x - <x>, P = p - <p>; with this convention the
/// closed second-moment equations below hold exactly.
struct MomentState {
  double var_x = 0.0;
  double cov = 0.0;
  double var_p = 0.0;

  /// <PX + XP>, the fully symmetrized correlation (twice `cov`).
  double cov_symmetrized() const { return 2.0 * cov; }
};

/// var_x var_p - cov^2; conserved by quadratic dynamics, >= hbar^2/4 for pure states.
inline double symplectic_invariant(const MomentState& m) {
  return m.var_x * m.var_p - m.cov * m.cov;
}

enum class Axis { position, momentum };

namespace detail {

struct Density {
  std::vector<double> weight;  // |amplitude|^2 * cell
  std::vector<double> coord;
  double mass = 0.0;

  static Density of(const WaveFunction& psi, const PhysicalParams& params) {
    Density d;
    const double cell = psi.cell(params);
    d.weight.resize(psi.amplitudes.size());
    d.coord.resize(psi.amplitudes.size());
    for (std::size_t j = 0; j < psi.amplitudes.size(); ++j) {
      d.weight[j] = std::norm(psi.amplitudes[j]) * cell;
      d.coord[j] = psi.coordinate(j, params);
      d.mass += d.weight[j];
    }
    return d;
  }

  double mean() const {
    double s = 0.0;
    for (std::size_t j = 0; j < weight.size(); ++j) s += coord[j] * weight[j];
    return s / mass;
  }

  double central(int n, double centre) const {
    double s = 0.0;
    for (std::size_t j = 0; j < weight.size(); ++j) s += std::pow(coord[j] - centre, n) * weight[j];
    return s / mass;
  }
};

inline void require_resolved(const Density& d, const Grid& grid, const PhysicalParams& params) {
  const double spread = std::sqrt(d.central(2, d.mean()));
  const double dp = grid.dp(params.hbar);
  if (spread < 4.0 * dp) {
    throw UnderResolved("momentum spread " + std::to_string(spread) +
                        " is below 4 lattice spacings (dp=" + std::to_string(dp) + ")");
  }
}

}  // namespace detail

inline double mean_position(const WaveFunction& psi, const PhysicalParams& params) {
  detail::require(psi, Representation::position, "mean_position");
  return detail::Density::of(psi, params).mean();
}

/// <p> from the momentum-space density.
inline double mean_momentum(const WaveFunction& psi, const PhysicalParams& params) {
  const WaveFunction phi = psi.representation == Representation::momentum
                               ? psi
                               : to_momentum(psi, params);
  return detail::Density::of(phi, params).mean();
}

/// <(q - <q>)^n> along the requested axis. The momentum axis is evaluated on
/// |phi|^2 and requires the packet to span at least four momentum spacings.
inline double centered_moment(const WaveFunction& psi, Axis axis, int n,
                              const PhysicalParams& params) {
  if (n < 1) throw std::invalid_argument("moment order must be >= 1");
  detail::require(psi, Representation::position, "centered_moment");
  if (axis == Axis::position) {
    const auto d = detail::Density::of(psi, params);
    return d.central(n, d.mean());
  }
  const auto d = detail::Density::of(to_momentum(psi, params), params);
  detail::require_resolved(d, psi.grid, params);
  return d.central(n, d.mean());
}

/// (1/2)<psi|(P X + X P)|psi>, with P applied spectrally. The imaginary part
/// vanishes for a Hermitian P; it is checked and dropped.
inline double covariance(const WaveFunction& psi, const PhysicalParams& params) {
  detail::require(psi, Representation::position, "covariance");
  const double mx = mean_position(psi, params);
  const double mp = mean_momentum(psi, params);
  const auto deviation_p = [&](double p) { return complex(p - mp, 0.0); };

  WaveFunction x_psi = psi;
  for (std::size_t j = 0; j < x_psi.amplitudes.size(); ++j) {
    x_psi.amplitudes[j] *= psi.grid.x(j) - mx;
  }
  const WaveFunction p_x_psi = apply_momentum_multiplier(x_psi, params, deviation_p);
  const WaveFunction p_psi = apply_momentum_multiplier(psi, params, deviation_p);

  complex sum{0.0, 0.0};
  double mass = 0.0;
  for (std::size_t j = 0; j < psi.amplitudes.size(); ++j) {
    const complex x_p_psi = (psi.grid.x(j) - mx) * p_psi.amplitudes[j];
    sum += std::conj(psi.amplitudes[j]) * (p_x_psi.amplitudes[j] + x_p_psi);
    mass += std::norm(psi.amplitudes[j]);
  }
  const complex value = 0.5 * sum / mass;
  if (std::abs(value.imag()) > 1e-10 * std::max(1.0, std::abs(value.real()))) {
    throw Error("covariance has a non-negligible imaginary part " + std::to_string(value.imag()));
  }
  return value.real();
}

inline MomentState extract_moments(const WaveFunction& psi, const PhysicalParams& params) {
  return {centered_moment(psi, Axis::position, 2, params), covariance(psi, params),
          centered_moment(psi, Axis::momentum, 2, params)};
}

/// Means plus centered moments of orders 2..max_order on both axes, computed
/// from a single momentum transform.
struct MomentProfile {
  double norm = 0.0;
  double mean_x = 0.0;
  double mean_p = 0.0;
  double cov = 0.0;
  std::vector<double> position;  // index k holds order k + 2
  std::vector<double> momentum;

  double var_x() const { return position.at(0); }
  double var_p() const { return momentum.at(0); }
  MomentState second() const { return {var_x(), cov, var_p()}; }
};

inline MomentProfile moment_profile(const WaveFunction& psi, const PhysicalParams& params,
                                    int max_order = 6) {
  detail::require(psi, Representation::position, "moment_profile");
  MomentProfile out;
  const auto dx = detail::Density::of(psi, params);
  const auto dp = detail::Density::of(to_momentum(psi, params), params);
  out.norm = std::sqrt(dx.mass);
  out.mean_x = dx.mean();
  out.mean_p = dp.mean();
  for (int n = 2; n <= max_order; ++n) {
    out.position.push_back(dx.central(n, out.mean_x));
    out.momentum.push_back(dp.central(n, out.mean_p));
  }
  out.cov = covariance(psi, params);
  return out;
}

// ---------------------------------------------------------------------------
// Closed second-moment dynamics
// ---------------------------------------------------------------------------

struct MomentSample {
  double t = 0.0;
  MomentState moments;
};

/// RK4 on
///   var_x' = 2a cov + 2b var_x,  cov' = a var_p - c var_x,  var_p' = -2b var_p - 2c cov.
/// Only a, b, c enter; the linear terms of the Hamiltonian cannot.
inline std::vector<MomentSample> evolve_second_moments(const QuadraticCoefficients& coeffs,
                                                       const MomentState& init, double t_start,
                                                       double t_end, double dt) {
  if (!(init.var_x > 0.0) || !(init.var_p > 0.0)) {
    throw std::invalid_argument("initial variances must be positive");
  }
  const auto times = time_lattice(t_start, t_end, dt);
  auto rhs = [&](double t, const StateVector<3>& y) {
    const double a = coeffs.a(t);
    const double b = coeffs.b(t);
    const double c = coeffs.c(t);
    return StateVector<3>{2.0 * a * y[1] + 2.0 * b * y[0], a * y[2] - c * y[0],
                          -2.0 * b * y[2] - 2.0 * c * y[1]};
  };
  std::vector<MomentSample> out;
  out.reserve(times.size());
  StateVector<3> y{init.var_x, init.cov, init.var_p};
  out.push_back({times.front(), init});
  for (std::size_t k = 1; k < times.size(); ++k) {
    y = rk4_step(rhs, times[k - 1], y, times[k] - times[k - 1]);
    require_finite(y, times[k]);
    out.push_back({times[k], {y[0], y[1], y[2]}});
  }
  return out;
}

}  // namespace quadshift
