#pragma once

#include <algorithm>
#include <limits>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "quadshift/errors.hpp"

namespace quadshift {

struct QuadratureOptions {
  double abs_tol = 1e-12;
  int max_depth = 48;
  long max_evaluations = 20'000'000;
};

namespace detail {

template <class F>
struct SimpsonState {
  const F& f;
  const QuadratureOptions& opts;
  long evaluations = 0;

  double eval(double x) {
    if (++evaluations > opts.max_evaluations) {
      throw QuadratureFailure("adaptive Simpson exceeded its evaluation budget");
    }
    return f(x);
  }

  double refine(double a, double b, double fa, double fm, double fb, double whole, double tol,
                int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = eval(lm);
    const double frm = eval(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (std::abs(delta) <= 64.0 * std::numeric_limits<double>::epsilon() *
                               (std::abs(left) + std::abs(right))) {
      return left + right + delta / 15.0;
    }
    // Intervals that can no longer be split in floating point have converged as far
    // as they ever will.
    if (!(lm > a && m > lm && rm > m && b > rm)) return left + right + delta / 15.0;
    if (depth >= opts.max_depth) {
      throw QuadratureFailure("adaptive Simpson could not reach tolerance " +
                              std::to_string(opts.abs_tol) + " on [" + std::to_string(a) + ", " +
                              std::to_string(b) + "]");
    }
    return refine(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           refine(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }
};

}  // namespace detail

/// Options for an integral nested inside the integrand of another over a range of
/// length `span`: its error enters the outer integrand as noise, so it must sit well
/// below the outer tolerance.
inline QuadratureOptions nested_options(const QuadratureOptions& outer, double span) {
  QuadratureOptions inner = outer;
  inner.abs_tol = outer.abs_tol * 0.05 / std::max(1.0, span);
  return inner;
}

/// Adaptive Simpson quadrature of f over [a, b] with absolute tolerance.
/// `breakpoints` inside (a, b) split the range so that kinks are never straddled.
template <class F>
double integrate(const F& f, double a, double b, std::span<const double> breakpoints = {},
                 const QuadratureOptions& opts = {}) {
  if (a == b) return 0.0;
  if (b < a) return -integrate(f, b, a, breakpoints, opts);

  std::vector<double> cuts{a};
  for (double x : breakpoints) {
    if (x > a && x < b) cuts.push_back(x);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());

  detail::SimpsonState<F> state{f, opts};
  const double total = b - a;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i];
    const double hi = cuts[i + 1];
    if (hi <= lo) continue;
    // A piece ending on a breakpoint takes the left limit there, so a jump
    // belonging to the next piece is never sampled.
    const bool hi_is_break =
        i + 2 < cuts.size() ||
        std::find(breakpoints.begin(), breakpoints.end(), hi) != breakpoints.end();
    const double flo = state.eval(lo);
    const double fhi = state.eval(hi_is_break ? std::nextafter(hi, lo) : hi);
    const double fmid = state.eval(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    // tolerance shared between pieces in proportion to length
    const double tol = opts.abs_tol * (hi - lo) / total;
    sum += state.refine(lo, hi, flo, fmid, fhi, whole, tol, 0);
  }
  return sum;
}

}  // namespace quadshift
