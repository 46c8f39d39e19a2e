#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "quadshift/classical.hpp"
#include "quadshift/errors.hpp"
#include "quadshift/model.hpp"
#include "quadshift/representation.hpp"

namespace quadshift {

/// Largest |x_bar| (as a fraction of the grid span) and |p_bar| (as a fraction
/// of the momentum lattice width) a spectral translation may apply.
inline constexpr double max_shift_fraction = 0.25;

namespace detail {

inline void require_unaliased(const ShiftState& shift, const Grid& grid,
                              const PhysicalParams& params) {
  if (std::abs(shift.x_bar) > max_shift_fraction * grid.span()) {
    throw AliasedShift("|x_bar| = " + std::to_string(std::abs(shift.x_bar)) +
                       " exceeds 25% of the grid span");
  }
  if (std::abs(shift.p_bar) > max_shift_fraction * grid.momentum_span(params.hbar)) {
    throw AliasedShift("|p_bar| = " + std::to_string(std::abs(shift.p_bar)) +
                       " exceeds 25% of the momentum lattice");
  }
}

inline void require_same_time(double a, double b) {
  if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a))) {
    throw std::invalid_argument("wave function time " + std::to_string(a) +
                                " does not match shift time " + std::to_string(b));
  }
}

}  // namespace detail

/// psi(x) = exp[i (p_bar x - beta) / hbar] Psi(x - x_bar).
/// The translation is spectral, so it is exact for band-limited Psi.
inline WaveFunction apply_linear_shift(const WaveFunction& reduced, const ShiftState& shift,
                                       const PhysicalParams& params) {
  detail::require(reduced, Representation::position, "apply_linear_shift");
  detail::require_same_time(reduced.t, shift.t);
  detail::require_unaliased(shift, reduced.grid, params);
  WaveFunction out = translate_spectral(reduced, shift.x_bar, params);
  for (std::size_t j = 0; j < out.amplitudes.size(); ++j) {
    out.amplitudes[j] *=
        std::polar(1.0, (shift.p_bar * out.grid.x(j) - shift.beta) / params.hbar);
  }
  return out;
}

/// Psi(xi) = exp[-i (p_bar (xi + x_bar) - beta) / hbar] psi(xi + x_bar).
inline WaveFunction invert_linear_shift(const WaveFunction& full, const ShiftState& shift,
                                        const PhysicalParams& params) {
  detail::require(full, Representation::position, "invert_linear_shift");
  detail::require_same_time(full.t, shift.t);
  detail::require_unaliased(shift, full.grid, params);
  WaveFunction out = full;
  for (std::size_t j = 0; j < out.amplitudes.size(); ++j) {
    out.amplitudes[j] *=
        std::polar(1.0, -(shift.p_bar * out.grid.x(j) - shift.beta) / params.hbar);
  }
  return translate_spectral(out, -shift.x_bar, params);
}

/// Momentum-space prediction exp[-i (x_bar p - gamma) / hbar] Phi(p - p_bar),
/// with gamma = p_bar x_bar - beta.
inline WaveFunction apply_linear_shift_momentum(const WaveFunction& reduced,
                                                const ShiftState& shift,
                                                const PhysicalParams& params) {
  detail::require(reduced, Representation::position, "apply_linear_shift_momentum");
  detail::require_same_time(reduced.t, shift.t);
  detail::require_unaliased(shift, reduced.grid, params);
  // Multiplying by exp(i p_bar x / hbar) before the transform translates Phi by p_bar.
  WaveFunction boosted = reduced;
  for (std::size_t j = 0; j < boosted.amplitudes.size(); ++j) {
    boosted.amplitudes[j] *= std::polar(1.0, shift.p_bar * boosted.grid.x(j) / params.hbar);
  }
  WaveFunction phi = to_momentum(boosted, params);
  const double gamma = shift.p_bar * shift.x_bar - shift.beta;
  for (std::size_t k = 0; k < phi.amplitudes.size(); ++k) {
    const double p = phi.grid.p(k, params.hbar);
    phi.amplitudes[k] *= std::polar(1.0, -(shift.x_bar * p - gamma) / params.hbar);
  }
  return phi;
}

struct ResidualReport {
  double l2_residual = 0.0;     // ||a - b|| / ||a||
  double max_pointwise = 0.0;   // max |a - b| / max |a|
  double t = 0.0;
  Representation representation = Representation::position;
};

/// Raw comparison, with no global-phase alignment: the absolute phase is part
/// of the prediction under test.
inline ResidualReport compare(const WaveFunction& expected, const WaveFunction& actual) {
  if (expected.amplitudes.size() != actual.amplitudes.size() ||
      expected.representation != actual.representation) {
    throw std::invalid_argument("compare: wave functions are not on the same lattice");
  }
  double diff2 = 0.0;
  double ref2 = 0.0;
  double diff_max = 0.0;
  double ref_max = 0.0;
  for (std::size_t j = 0; j < expected.amplitudes.size(); ++j) {
    const double d = std::abs(expected.amplitudes[j] - actual.amplitudes[j]);
    const double r = std::abs(expected.amplitudes[j]);
    diff2 += d * d;
    ref2 += r * r;
    diff_max = std::max(diff_max, d);
    ref_max = std::max(ref_max, r);
  }
  ResidualReport out;
  out.l2_residual = ref2 > 0.0 ? std::sqrt(diff2 / ref2) : std::sqrt(diff2);
  out.max_pointwise = ref_max > 0.0 ? diff_max / ref_max : diff_max;
  out.t = expected.t;
  out.representation = expected.representation;
  return out;
}

/// Distance between the directly evolved `full` state and the transformed
/// `reduced` state, in position or momentum space.
inline ResidualReport theorem_residual(const WaveFunction& full, const WaveFunction& reduced,
                                       const ShiftState& shift, const PhysicalParams& params,
                                       Representation representation) {
  detail::require(full, Representation::position, "theorem_residual");
  detail::require_same_time(full.t, reduced.t);
  if (representation == Representation::position) {
    return compare(full, apply_linear_shift(reduced, shift, params));
  }
  return compare(to_momentum(full, params), apply_linear_shift_momentum(reduced, shift, params));
}

}  // namespace quadshift
