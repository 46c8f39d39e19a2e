#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quadshift/classical.hpp"
#include "quadshift/errors.hpp"
#include "quadshift/model.hpp"
#include "quadshift/moments.hpp"

namespace quadshift {

/// Accuracy order of the central-difference stencils used for p and p^2.
/// Order 2 is the classic 3-point (tridiagonal) discretization.
inline constexpr int default_stencil_order = 12;

struct StencilWeights {
  std::vector<double> first;   // d/dx:  first[k] / dx multiplies psi_{j+k} - psi_{j-k}, k >= 1
  std::vector<double> second;  // d2/dx2: second[0] / dx^2 on psi_j, second[k] on psi_{j+-k}
};

/// Central-difference weights of accuracy `order` (even, 2..12).
inline StencilWeights central_difference_weights(int order) {
  if (order < 2 || order > 12 || order % 2 != 0) {
    throw std::invalid_argument("stencil order must be an even number in [2, 12]");
  }
  const int m = order / 2;
  auto factorial = [](int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
  };
  StencilWeights w{std::vector<double>(m + 1, 0.0), std::vector<double>(m + 1, 0.0)};
  const double mf2 = factorial(m) * factorial(m);
  for (int k = 1; k <= m; ++k) {
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;
    const double base = mf2 / (factorial(m - k) * factorial(m + k));
    w.first[k] = sign * base / k;
    w.second[k] = 2.0 * sign * base / (static_cast<double>(k) * k);
    w.second[0] -= 2.0 * w.second[k];
  }
  return w;
}

/// Hermitian band matrix. upper[k-1][j] holds H(j, j+k) and lower[k-1][j]
/// holds H(j+k, j) for k = 1..half_bandwidth.
struct BandOperator {
  std::size_t half_bandwidth = 1;
  std::vector<complex> diag;
  std::vector<std::vector<complex>> upper;
  std::vector<std::vector<complex>> lower;
  double t = 0.0;

  std::size_t size() const noexcept { return diag.size(); }

  /// Exact (bitwise) Hermiticity: real diagonal, lower = conj(upper).
  bool is_hermitian() const {
    for (const auto& d : diag) {
      if (d.imag() != 0.0) return false;
    }
    for (std::size_t k = 0; k < upper.size(); ++k) {
      for (std::size_t j = 0; j < upper[k].size(); ++j) {
        if (lower[k][j] != std::conj(upper[k][j])) return false;
      }
    }
    return true;
  }

  std::vector<complex> apply(std::span<const complex> v) const {
    const std::size_t n = size();
    std::vector<complex> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = diag[j] * v[j];
    for (std::size_t k = 1; k <= half_bandwidth; ++k) {
      const auto& up = upper[k - 1];
      const auto& lo = lower[k - 1];
      for (std::size_t j = 0; j + k < n; ++j) {
        out[j] += up[j] * v[j + k];
        out[j + k] += lo[j] * v[j];
      }
    }
    return out;
  }
};

/// H(t) on the grid with Dirichlet boundaries:
///   a p^2/2 via the central second difference, c x^2/2 + g x on the diagonal,
///   f p via the central first difference, and b (px + xp)/2 via the symmetrized
///   stencil -i hbar b w_k (x_j + x_{j+k}) / (2 dx) on the k-th upper band.
/// Lower bands are written as conjugates of the upper ones, so the result is
/// Hermitian by construction.
inline BandOperator build_generator(const CoefficientSet& coeffs, const Grid& grid, double t,
                                    const PhysicalParams& params,
                                    int stencil_order = default_stencil_order) {
  const auto w = central_difference_weights(stencil_order);
  const std::size_t m = static_cast<std::size_t>(stencil_order / 2);
  const std::size_t n = grid.size();
  const double hbar = params.hbar;
  const double dx = grid.dx();
  const double a = coeffs.a(t);
  const double b = coeffs.b(t);
  const double c = coeffs.c(t);
  const double f = coeffs.f(t);
  const double g = coeffs.g(t);

  BandOperator op;
  op.half_bandwidth = m;
  op.t = t;
  op.diag.resize(n);
  const double kinetic = -0.5 * a * hbar * hbar / (dx * dx);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = grid.x(j);
    op.diag[j] = complex(kinetic * w.second[0] + 0.5 * c * x * x + g * x, 0.0);
  }
  op.upper.resize(m);
  op.lower.resize(m);
  for (std::size_t k = 1; k <= m; ++k) {
    auto& up = op.upper[k - 1];
    auto& lo = op.lower[k - 1];
    up.resize(n - k);
    lo.resize(n - k);
    const double first = w.first[k] / dx;
    for (std::size_t j = 0; j + k < n; ++j) {
      const double mixed = 0.5 * b * first * (grid.x(j) + grid.x(j + k));
      up[j] = complex(kinetic * w.second[k], -hbar * (f * first + mixed));
      lo[j] = std::conj(up[j]);
    }
  }
  return op;
}

namespace detail {

/// Solves (I + s H) x = rhs for band-Hermitian H by banded Gaussian elimination
/// without pivoting. The Hermitian part of I + s H is the identity when s is
/// imaginary, so every leading minor is nonsingular.
inline std::vector<complex> solve_shifted_band(const BandOperator& H, complex s,
                                               std::vector<complex> rhs) {
  const std::size_t n = H.size();
  const std::size_t m = H.half_bandwidth;
  const std::size_t width = 2 * m + 1;
  std::vector<complex> band(n * width, complex{});
  auto at = [&](std::size_t row, std::size_t col) -> complex& {
    return band[row * width + (col + m - row)];
  };
  for (std::size_t j = 0; j < n; ++j) at(j, j) = 1.0 + s * H.diag[j];
  for (std::size_t k = 1; k <= m; ++k) {
    for (std::size_t j = 0; j + k < n; ++j) {
      at(j, j + k) = s * H.upper[k - 1][j];
      at(j + k, j) = s * H.lower[k - 1][j];
    }
  }
  std::vector<double> row_scale(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < width; ++c) {
      row_scale[j] = std::max(row_scale[j], std::abs(band[j * width + c]));
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const complex pivot = at(i, i);
    if (std::abs(pivot) < 1e-14 * row_scale[i]) {
      throw SolverBreakdown("pivot " + std::to_string(std::abs(pivot)) + " at row " +
                            std::to_string(i) + " collapsed; reduce dt");
    }
    const std::size_t last = std::min(i + m, n - 1);
    for (std::size_t r = i + 1; r <= last; ++r) {
      const complex factor = at(r, i) / pivot;
      if (factor == complex{}) continue;
      for (std::size_t c = i + 1; c <= last; ++c) at(r, c) -= factor * at(i, c);
      rhs[r] -= factor * rhs[i];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    complex acc = rhs[i];
    const std::size_t last = std::min(i + m, n - 1);
    for (std::size_t c = i + 1; c <= last; ++c) acc -= at(i, c) * rhs[c];
    rhs[i] = acc / at(i, i);
  }
  return rhs;
}

}  // namespace detail

/// Cayley step psi' = (1 + i dt H / 2 hbar)^-1 (1 - i dt H / 2 hbar) psi with a
/// frozen generator. dt may be negative.
inline std::vector<complex> cayley_step(std::span<const complex> psi, const BandOperator& H,
                                        double dt, const PhysicalParams& params) {
  const complex s(0.0, 0.5 * dt / params.hbar);
  auto rhs = H.apply(psi);
  for (std::size_t j = 0; j < rhs.size(); ++j) rhs[j] = psi[j] - s * rhs[j];
  return detail::solve_shifted_band(H, s, std::move(rhs));
}

/// Crank-Nicolson step with the generator evaluated at the midpoint t + dt/2.
inline WaveFunction cn_step(const WaveFunction& psi, const CoefficientSet& coeffs, double dt,
                            const PhysicalParams& params,
                            int stencil_order = default_stencil_order) {
  detail::require(psi, Representation::position, "cn_step");
  if (!(dt > 0.0)) throw std::invalid_argument("cn_step requires dt > 0");
  const double t_mid = psi.t + 0.5 * dt;
  coeffs.check_at(t_mid);
  const BandOperator H = build_generator(coeffs, psi.grid, t_mid, params, stencil_order);
  WaveFunction out{cayley_step(psi.amplitudes, H, dt, params), Representation::position,
                   psi.t + dt, psi.grid};
  for (const auto& z : out.amplitudes) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw NonFiniteState("propagation produced a non-finite amplitude at t=" +
                           std::to_string(out.t));
    }
  }
  return out;
}

/// psi' = exp(-i dt H / hbar) psi for a frozen Hermitian generator, evaluated in
/// a Lanczos (Krylov) basis grown until the truncation estimate drops below
/// 1e-15 of the norm. dt may be negative.
inline std::vector<complex> exponential_step(std::span<const complex> psi, const BandOperator& H,
                                             double dt, const PhysicalParams& params) {
  constexpr int max_dimension = 64;
  constexpr double tolerance = 1e-15;
  const std::size_t n = psi.size();

  double psi_norm = 0.0;
  for (const auto& z : psi) psi_norm += std::norm(z);
  psi_norm = std::sqrt(psi_norm);
  if (psi_norm == 0.0) return {psi.begin(), psi.end()};

  std::vector<std::vector<complex>> basis;
  basis.emplace_back(psi.begin(), psi.end());
  for (auto& z : basis.front()) z /= psi_norm;
  std::vector<double> alpha;
  std::vector<double> beta;
  Eigen::VectorXcd coefficients;

  for (int k = 0;; ++k) {
    std::vector<complex> w = H.apply(basis[k]);
    complex a{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) a += std::conj(basis[k][j]) * w[j];
    alpha.push_back(a.real());
    for (std::size_t j = 0; j < n; ++j) {
      w[j] -= a.real() * basis[k][j];
      if (k > 0) w[j] -= beta[k - 1] * basis[k - 1][j];
    }
    double b = 0.0;
    for (const auto& z : w) b += std::norm(z);
    b = std::sqrt(b);

    // exp(-i dt T / hbar) e_1 on the current tridiagonal projection T.
    const int m = k + 1;
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(alpha.data(), m);
    Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(beta.data(), m - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    eig.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
    const auto& vecs = eig.eigenvectors();
    Eigen::VectorXcd weights(m);
    for (int l = 0; l < m; ++l) {
      weights[l] = std::polar(1.0, -eig.eigenvalues()[l] * dt / params.hbar) * vecs(0, l);
    }
    coefficients = vecs.cast<complex>() * weights;

    if (b * std::abs(coefficients[m - 1]) < tolerance || b == 0.0) break;
    if (m >= max_dimension) {
      throw SolverBreakdown("Krylov exponential did not converge in " +
                            std::to_string(max_dimension) + " vectors; reduce dt");
    }
    beta.push_back(b);
    for (auto& z : w) z /= b;
    basis.push_back(std::move(w));
  }

  std::vector<complex> out(n, complex{});
  for (Eigen::Index i = 0; i < coefficients.size(); ++i) {
    const complex c = coefficients[i] * psi_norm;
    for (std::size_t j = 0; j < n; ++j) out[j] += c * basis[i][j];
  }
  return out;
}

/// Propagation scheme. Both are second order for time-dependent coefficients and
/// evaluate the generator at the step midpoint. The exponential step is exact for
/// frozen coefficients, so it commutes with the displacement that relates the
/// full and linear-term-free dynamics; Crank-Nicolson does so only to O(dt^2).
enum class Scheme { exponential_midpoint, crank_nicolson };

inline const char* to_string(Scheme s) {
  return s == Scheme::exponential_midpoint ? "exponential-midpoint" : "crank-nicolson";
}

struct Discretization {
  int stencil_order = default_stencil_order;
  Scheme scheme = Scheme::exponential_midpoint;
};

/// One step of the configured scheme with the generator frozen at t + dt/2.
inline WaveFunction propagate_step(const WaveFunction& psi, const CoefficientSet& coeffs,
                                   double dt, const PhysicalParams& params,
                                   const Discretization& disc = {}) {
  if (disc.scheme == Scheme::crank_nicolson) {
    return cn_step(psi, coeffs, dt, params, disc.stencil_order);
  }
  detail::require(psi, Representation::position, "propagate_step");
  if (!(dt > 0.0)) throw std::invalid_argument("propagate_step requires dt > 0");
  const double t_mid = psi.t + 0.5 * dt;
  coeffs.check_at(t_mid);
  const BandOperator H = build_generator(coeffs, psi.grid, t_mid, params, disc.stencil_order);
  WaveFunction out{exponential_step(psi.amplitudes, H, dt, params), Representation::position,
                   psi.t + dt, psi.grid};
  for (const auto& z : out.amplitudes) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw NonFiniteState("propagation produced a non-finite amplitude at t=" +
                           std::to_string(out.t));
    }
  }
  return out;
}

/// Number of cells in each outer margin watched by boundary_leak.
inline std::size_t margin_cells(const Grid& grid) {
  return std::max<std::size_t>(1, grid.size() / 20);
}

/// Probability sum |psi_j|^2 dx over the outer 5% of cells on each side.
inline double boundary_leak(const WaveFunction& psi) {
  detail::require(psi, Representation::position, "boundary_leak");
  const std::size_t n = psi.amplitudes.size();
  const std::size_t margin = margin_cells(psi.grid);
  double sum = 0.0;
  for (std::size_t j = 0; j < margin; ++j) {
    sum += std::norm(psi.amplitudes[j]) + std::norm(psi.amplitudes[n - 1 - j]);
  }
  return sum * psi.grid.dx();
}

// ---------------------------------------------------------------------------
// Time evolution
// ---------------------------------------------------------------------------

struct EvolveOptions {
  double t_end = 1.0;
  double dt = 1e-3;
  std::size_t output_stride = 1;
  std::vector<double> snapshot_times;
  Discretization discretization;
  double leak_threshold = 1e-6;
};

struct Observation {
  double t = 0.0;
  double norm = 0.0;
  double mean_x = 0.0;
  double mean_p = 0.0;
  MomentState moments;
  double leak = 0.0;
};

inline Observation observe(const WaveFunction& psi, const PhysicalParams& params) {
  const auto profile = moment_profile(psi, params, 2);
  return {psi.t, profile.norm, profile.mean_x, profile.mean_p, profile.second(),
          boundary_leak(psi)};
}

struct Evolution {
  std::vector<Observation> series;
  std::vector<WaveFunction> snapshots;  // in the order of snapshot_times
  WaveFunction final_state;
};

/// Index into `times` of the sample nearest each requested time.
inline std::vector<std::size_t> nearest_samples(std::span<const double> times,
                                                std::span<const double> requested) {
  std::vector<std::size_t> out;
  for (double r : requested) {
    auto it = std::lower_bound(times.begin(), times.end(), r);
    std::size_t idx = static_cast<std::size_t>(it - times.begin());
    if (idx == times.size()) {
      idx = times.size() - 1;
    } else if (idx > 0 && r - times[idx - 1] <= times[idx] - r) {
      --idx;
    }
    out.push_back(idx);
  }
  return out;
}

/// Steps `initial` from its own time to opts.t_end. Observables are recorded at
/// every `output_stride`-th step and at the final time.
inline Evolution evolve(const CoefficientSet& coeffs, const WaveFunction& initial,
                        const EvolveOptions& opts, const PhysicalParams& params) {
  if (opts.output_stride == 0) throw std::invalid_argument("output_stride must be >= 1");
  const auto times = time_lattice(initial.t, opts.t_end, opts.dt);
  const auto snap_index = nearest_samples(times, opts.snapshot_times);

  Evolution out{{}, std::vector<WaveFunction>(snap_index.size(), initial), initial};
  WaveFunction psi = initial;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (k > 0) {
      psi = propagate_step(psi, coeffs, times[k] - times[k - 1], params, opts.discretization);
      psi.t = times[k];
    }
    const double leak = boundary_leak(psi);
    if (leak > opts.leak_threshold) throw BoundaryLeak(psi.t, leak);
    if (k % opts.output_stride == 0 || k + 1 == times.size()) {
      out.series.push_back(observe(psi, params));
    }
    for (std::size_t s = 0; s < snap_index.size(); ++s) {
      if (snap_index[s] == k) out.snapshots[s] = psi;
    }
  }
  out.final_state = std::move(psi);
  return out;
}

}  // namespace quadshift
