#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "quadshift/errors.hpp"

namespace quadshift {

using complex = std::complex<double>;

struct PhysicalParams {
  double hbar = 1.0;

  void validate() const {
    if (!(hbar > 0.0) || !std::isfinite(hbar)) {
      throw std::invalid_argument("hbar must be positive and finite");
    }
  }
};

// ---------------------------------------------------------------------------
// Coefficient functions
// ---------------------------------------------------------------------------

/// amplitude * sin(omega * (t - t_start) + phase)
struct Sinusoid {
  double amplitude = 0.0;
  double omega = 0.0;
  double phase = 0.0;

  friend bool operator==(const Sinusoid&, const Sinusoid&) = default;
};

/// One closed-form piece, active from `t_start` until the next segment begins.
/// Both the cubic and the sinusoids use the local time tau = t - t_start.
struct Segment {
  double t_start = 0.0;
  std::array<double, 4> poly{};
  std::vector<Sinusoid> sines;

  double operator()(double t) const {
    const double tau = t - t_start;
    double value = ((poly[3] * tau + poly[2]) * tau + poly[1]) * tau + poly[0];
    for (const auto& s : sines) {
      value += s.amplitude * std::sin(s.omega * tau + s.phase);
    }
    return value;
  }

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Piecewise (cubic + sinusoids) function of time. An empty function is the
/// zero function and is defined for every t; otherwise evaluation before the
/// first segment start throws std::domain_error.
class CoefficientFunction {
 public:
  CoefficientFunction() = default;

  explicit CoefficientFunction(std::vector<Segment> segments) : segments_(std::move(segments)) {
    for (std::size_t i = 1; i < segments_.size(); ++i) {
      if (!(segments_[i].t_start > segments_[i - 1].t_start)) {
        throw std::invalid_argument("segment start times must be strictly increasing");
      }
    }
    for (const auto& s : segments_) {
      bool finite = std::isfinite(s.t_start);
      for (double c : s.poly) finite = finite && std::isfinite(c);
      for (const auto& w : s.sines) {
        finite = finite && std::isfinite(w.amplitude) && std::isfinite(w.omega) &&
                 std::isfinite(w.phase);
      }
      if (!finite) throw std::invalid_argument("coefficient parameters must be finite");
    }
  }

  static CoefficientFunction constant(double value, double t_start = 0.0) {
    if (value == 0.0) return {};
    return CoefficientFunction({Segment{t_start, {value, 0.0, 0.0, 0.0}, {}}});
  }

  static CoefficientFunction polynomial(std::array<double, 4> coeffs, double t_start = 0.0) {
    return CoefficientFunction({Segment{t_start, coeffs, {}}});
  }

  static CoefficientFunction sinusoid(double amplitude, double omega, double phase = 0.0,
                                      double offset = 0.0, double t_start = 0.0) {
    return CoefficientFunction(
        {Segment{t_start, {offset, 0.0, 0.0, 0.0}, {Sinusoid{amplitude, omega, phase}}}});
  }

  double operator()(double t) const {
    if (segments_.empty()) return 0.0;
    if (t < segments_.front().t_start) {
      throw std::domain_error("coefficient evaluated before its first segment (t=" +
                              std::to_string(t) + ")");
    }
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const Segment& s) { return v < s.t_start; });
    return (*std::prev(it))(t);
  }

  std::span<const Segment> segments() const noexcept { return segments_; }

  /// True when every stored parameter is zero (or there are no segments).
  bool is_zero() const {
    return std::all_of(segments_.begin(), segments_.end(), [](const Segment& s) {
      return std::all_of(s.poly.begin(), s.poly.end(), [](double c) { return c == 0.0; }) &&
             std::all_of(s.sines.begin(), s.sines.end(),
                         [](const Sinusoid& w) { return w.amplitude == 0.0; });
    });
  }

  /// Interior segment boundaries, where the function may be non-smooth.
  std::vector<double> breakpoints() const {
    std::vector<double> out;
    for (std::size_t i = 1; i < segments_.size(); ++i) out.push_back(segments_[i].t_start);
    return out;
  }

  double domain_start() const {
    return segments_.empty() ? -std::numeric_limits<double>::infinity()
                             : segments_.front().t_start;
  }

  CoefficientFunction scaled(double factor) const {
    auto out = segments_;
    for (auto& s : out) {
      for (double& c : s.poly) c *= factor;
      for (auto& w : s.sines) w.amplitude *= factor;
    }
    return CoefficientFunction(std::move(out));
  }

  /// Exact sum, re-expressing both operands on the union of their segment starts.
  friend CoefficientFunction operator+(const CoefficientFunction& lhs,
                                       const CoefficientFunction& rhs) {
    if (lhs.segments_.empty()) return rhs;
    if (rhs.segments_.empty()) return lhs;
    const double start = std::max(lhs.domain_start(), rhs.domain_start());
    std::vector<double> starts{start};
    for (const auto* fn : {&lhs, &rhs}) {
      for (const auto& s : fn->segments_) {
        if (s.t_start > start) starts.push_back(s.t_start);
      }
    }
    std::sort(starts.begin(), starts.end());
    starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

    std::vector<Segment> merged;
    for (double s : starts) {
      Segment seg{s, {}, {}};
      for (const auto* fn : {&lhs, &rhs}) {
        const Segment rebased = fn->rebase_at(s);
        for (std::size_t i = 0; i < 4; ++i) seg.poly[i] += rebased.poly[i];
        seg.sines.insert(seg.sines.end(), rebased.sines.begin(), rebased.sines.end());
      }
      merged.push_back(std::move(seg));
    }
    return CoefficientFunction(std::move(merged));
  }

  friend bool operator==(const CoefficientFunction&, const CoefficientFunction&) = default;

 private:
  // Active segment at time s, rewritten in local time (t - s).
  Segment rebase_at(double s) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), s,
                               [](double v, const Segment& seg) { return v < seg.t_start; });
    const Segment& src = *std::prev(it);
    const double d = s - src.t_start;
    Segment out{s, {}, {}};
    static constexpr double binom[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j <= i; ++j) {
        out.poly[j] += src.poly[i] * binom[i][j] * std::pow(d, i - j);
      }
    }
    for (const auto& w : src.sines) {
      out.sines.push_back({w.amplitude, w.omega, w.phase + w.omega * d});
    }
    return out;
  }

  std::vector<Segment> segments_;
};

/// The a, b, c part of the Hamiltonian; all the moment dynamics ever needs.
struct QuadraticCoefficients {
  CoefficientFunction a, b, c;
};

/// H = a p^2/2 + b (px + xp)/2 + c x^2/2 + f p + g x, switched on at t0.
struct CoefficientSet {
  CoefficientFunction a, b, c, f, g;
  double t0 = 0.0;

  QuadraticCoefficients quadratic() const { return {a, b, c}; }

  bool has_linear_terms() const { return !f.is_zero() || !g.is_zero(); }

  /// Throws std::domain_error if any coefficient is undefined at t or a(t) <= 0.
  void check_at(double t) const {
    for (const auto* fn : {&a, &b, &c, &f, &g}) (void)(*fn)(t);
    if (!(a(t) > 0.0)) {
      throw std::domain_error("kinetic coefficient a(t) must be positive (t=" +
                              std::to_string(t) + ")");
    }
  }
};

/// Same a, b, c; f and g removed.
inline CoefficientSet strip_linear(const CoefficientSet& coeffs) {
  CoefficientSet out = coeffs;
  out.f = {};
  out.g = {};
  return out;
}

// ---------------------------------------------------------------------------
// Grid and wave functions
// ---------------------------------------------------------------------------

/// Uniform grid x_j = x_min + j*dx, j in [0, n), dx = (x_max - x_min)/n.
/// The momentum lattice is stored in centred order: index k maps to
/// p = 2*pi*hbar*(k - n/2)/(n*dx).
class Grid {
 public:
  Grid(double x_min, double x_max, std::size_t n) : x_min_(x_min), x_max_(x_max), n_(n) {
    if (n < 64 || (n & (n - 1)) != 0) {
      throw std::invalid_argument("grid point count must be a power of two >= 64");
    }
    if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_max > x_min)) {
      throw std::invalid_argument("grid requires finite x_min < x_max");
    }
  }

  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  std::size_t size() const noexcept { return n_; }
  double span() const noexcept { return x_max_ - x_min_; }
  double dx() const noexcept { return span() / static_cast<double>(n_); }
  double x(std::size_t j) const noexcept { return x_min_ + static_cast<double>(j) * dx(); }

  double dp(double hbar) const noexcept {
    return 2.0 * std::numbers::pi * hbar / (static_cast<double>(n_) * dx());
  }
  double p(std::size_t k, double hbar) const noexcept {
    return (static_cast<double>(k) - static_cast<double>(n_ / 2)) * dp(hbar);
  }
  /// Width of the momentum lattice, 2*pi*hbar/dx.
  double momentum_span(double hbar) const noexcept { return dp(hbar) * static_cast<double>(n_); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  double x_min_;
  double x_max_;
  std::size_t n_;
};

enum class Representation { position, momentum };

inline const char* to_string(Representation r) {
  return r == Representation::position ? "position" : "momentum";
}

struct WaveFunction {
  std::vector<complex> amplitudes;
  Representation representation = Representation::position;
  double t = 0.0;
  Grid grid;

  /// Quadrature weight of one sample: dx in position space, dp in momentum space.
  double cell(const PhysicalParams& params) const {
    return representation == Representation::position ? grid.dx() : grid.dp(params.hbar);
  }

  /// Coordinate of sample j in the current representation.
  double coordinate(std::size_t j, const PhysicalParams& params) const {
    return representation == Representation::position ? grid.x(j) : grid.p(j, params.hbar);
  }
};

/// Discrete L2 norm sqrt(sum |psi_j|^2 * cell).
inline double norm(const WaveFunction& psi, const PhysicalParams& params) {
  double sum = 0.0;
  for (const auto& z : psi.amplitudes) sum += std::norm(z);
  return std::sqrt(sum * psi.cell(params));
}

// ---------------------------------------------------------------------------
// Initial packets
// ---------------------------------------------------------------------------

struct GaussianPacketSpec {
  double x0 = 0.0;
  double p0 = 0.0;
  double sigma = 1.0;
  int hermite_n = 0;
  double chirp = 0.0;

  static constexpr int max_hermite_order = 10;

  void validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be > 0");
    if (hermite_n < 0 || hermite_n > max_hermite_order) {
      throw std::invalid_argument("hermite_n must be in [0, 10]");
    }
    if (!std::isfinite(x0) || !std::isfinite(p0) || !std::isfinite(chirp)) {
      throw std::invalid_argument("packet parameters must be finite");
    }
  }

  /// Half-width the packet needs on each side of x0.
  double support_radius() const { return 6.0 * sigma * std::sqrt(2.0 * hermite_n + 1.0); }
};

/// Physicists' Hermite polynomial H_n(u) by upward recurrence.
inline double hermite(int n, double u) {
  double prev = 1.0;
  if (n == 0) return prev;
  double cur = 2.0 * u;
  for (int k = 1; k < n; ++k) {
    const double next = 2.0 * u * cur - 2.0 * k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// psi ~ H_n(u) exp(-u^2/2 + i chirp (x-x0)^2/hbar + i p0 (x-x0)/hbar), u = (x-x0)/sigma,
/// normalized on the grid. |psi|^2 has variance (2n+1) sigma^2 / 2.
inline WaveFunction make_packet(const GaussianPacketSpec& spec, const Grid& grid,
                                const PhysicalParams& params, double t = 0.0) {
  spec.validate();
  params.validate();
  const double radius = spec.support_radius();
  if (!(spec.x0 - grid.x_min() >= radius) || !(grid.x_max() - spec.x0 >= radius)) {
    throw PacketTooWide("packet at x0=" + std::to_string(spec.x0) + " needs " +
                        std::to_string(radius) + " of room on each side; enlarge the grid");
  }
  WaveFunction psi{std::vector<complex>(grid.size()), Representation::position, t, grid};
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double d = grid.x(j) - spec.x0;
    const double u = d / spec.sigma;
    const double envelope = hermite(spec.hermite_n, u) * std::exp(-0.5 * u * u);
    const double phase = (spec.chirp * d * d + spec.p0 * d) / params.hbar;
    psi.amplitudes[j] = std::polar(1.0, phase) * envelope;
  }
  const double scale = 1.0 / norm(psi, params);
  for (auto& z : psi.amplitudes) z *= scale;
  return psi;
}

}  // namespace quadshift
