#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "quadshift/fourier.hpp"
#include "quadshift/model.hpp"

namespace quadshift {

namespace detail {

// (-1)^j modulation turns the raw DFT index directly into the centred
// momentum index k - n/2.
inline void alternate_signs(std::vector<complex>& v) {
  for (std::size_t j = 1; j < v.size(); j += 2) v[j] = -v[j];
}

inline void require(const WaveFunction& psi, Representation r, const char* op) {
  if (psi.representation != r) {
    throw std::invalid_argument(std::string(op) + " expects a " + to_string(r) +
                                "-representation wave function");
  }
}

}  // namespace detail

/// phi(p_k) = dx / sqrt(2 pi hbar) * sum_j exp(-i p_k x_j / hbar) psi_j.
/// Reproduces the continuum transform for well-sampled packets; norm-preserving.
inline WaveFunction to_momentum(const WaveFunction& psi, const PhysicalParams& params) {
  detail::require(psi, Representation::position, "to_momentum");
  const Grid& grid = psi.grid;
  WaveFunction out{psi.amplitudes, Representation::momentum, psi.t, grid};
  detail::alternate_signs(out.amplitudes);
  fft::transform(out.amplitudes, fft::Direction::forward);
  const double scale = grid.dx() / std::sqrt(2.0 * std::numbers::pi * params.hbar);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.amplitudes[k] *= std::polar(scale, -grid.p(k, params.hbar) * grid.x_min() / params.hbar);
  }
  return out;
}

/// Inverse of to_momentum.
inline WaveFunction to_position(const WaveFunction& phi, const PhysicalParams& params) {
  detail::require(phi, Representation::momentum, "to_position");
  const Grid& grid = phi.grid;
  WaveFunction out{phi.amplitudes, Representation::position, phi.t, grid};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.amplitudes[k] *= std::polar(1.0, grid.p(k, params.hbar) * grid.x_min() / params.hbar);
  }
  fft::transform(out.amplitudes, fft::Direction::backward);
  detail::alternate_signs(out.amplitudes);
  const double scale = grid.dp(params.hbar) / std::sqrt(2.0 * std::numbers::pi * params.hbar);
  for (auto& z : out.amplitudes) z *= scale;
  return out;
}

/// psi -> F^-1[ multiplier(p) * F[psi] ] for a position-space wave function.
/// The grid-origin phases of to_momentum cancel and are skipped.
template <class Multiplier>
WaveFunction apply_momentum_multiplier(const WaveFunction& psi, const PhysicalParams& params,
                                       const Multiplier& multiplier) {
  detail::require(psi, Representation::position, "apply_momentum_multiplier");
  const Grid& grid = psi.grid;
  WaveFunction out = psi;
  detail::alternate_signs(out.amplitudes);
  fft::transform(out.amplitudes, fft::Direction::forward);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.amplitudes[k] *= multiplier(grid.p(k, params.hbar));
  }
  fft::transform(out.amplitudes, fft::Direction::backward);
  detail::alternate_signs(out.amplitudes);
  const double inv_n = 1.0 / static_cast<double>(grid.size());
  for (auto& z : out.amplitudes) z *= inv_n;
  return out;
}

/// Periodic band-limited translation: returns psi(x - shift).
inline WaveFunction translate_spectral(const WaveFunction& psi, double shift,
                                       const PhysicalParams& params) {
  if (shift == 0.0) return psi;
  return apply_momentum_multiplier(
      psi, params, [&](double p) { return std::polar(1.0, -p * shift / params.hbar); });
}

}  // namespace quadshift
