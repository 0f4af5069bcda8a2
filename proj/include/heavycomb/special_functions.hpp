#pragma once

// Scalar special functions shared by every distribution: normal CDF and
// quantile, log-gamma, regularized incomplete gamma and beta, and a bracketed
// Brent root finder. All functions are pure and thread-safe.

#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <utility>

#include "heavycomb/errors.hpp"

namespace heavycomb {

/// Standard normal CDF. Throws ErrorCode::domain for non-finite x.
double normal_cdf(double x);

/// Standard normal survival 1 - Phi(x), accurate in the upper tail.
double normal_sf(double x);

/// Inverse of normal_cdf on (0, 1). u in {0, 1} throws infinite_quantile,
/// anything outside [0, 1] throws domain.
double normal_quantile(double u);

/// Phi^{-1}(1 - q) computed from q, so tiny upper-tail probabilities keep
/// their relative precision.
double normal_upper_quantile(double q);

/// Inverse error function on (-1, 1), refined against std::erf/std::erfc.
double erf_inv(double y);

/// log Gamma(a) for a > 0.
double log_gamma(double a);

/// Regularized lower incomplete gamma P(s, x).
double reg_gamma_lower(double s, double x);

/// Regularized upper incomplete gamma Q(s, x) = 1 - P(s, x).
double reg_gamma_upper(double s, double x);

/// Regularized incomplete beta I_x(a, b).
double reg_beta(double x, double a, double b);

/// 1 - I_x(a, b) without cancellation.
double reg_beta_complement(double x, double a, double b);

namespace detail {

struct BetaPair {
  double lower;  // I_x(a, b)
  double upper;  // 1 - I_x(a, b)
};

// Evaluates I_x(a, b) and its complement given both x and y = 1 - x, so callers
// that know y exactly (e.g. t survival with y = t^2 / (t^2 + nu)) avoid
// forming 1 - x.
BetaPair reg_beta_pair(double x, double y, double a, double b);

}  // namespace detail

struct RootBracket {
  double lo;
  double hi;
  double rel_tol = 1e-12;
  double abs_tol = 1e-300;
  int max_iter = 200;
};

/// Brent's method (inverse quadratic / secant steps with bisection fallback).
/// f(lo) and f(hi) must differ in sign; the result is deterministic for a given
/// bracket.
template <typename F>
  requires std::invocable<F&, double>
double find_root(F&& f, const RootBracket& bracket) {
  if (!(bracket.lo < bracket.hi) || !(bracket.rel_tol > 0) || !(bracket.abs_tol > 0) ||
      bracket.max_iter < 1) {
    fail(ErrorCode::domain, "find_root: invalid bracket");
  }
  double a = bracket.lo;
  double b = bracket.hi;
  double fa = f(a);
  double fb = f(b);
  if (std::isnan(fa) || std::isnan(fb)) fail(ErrorCode::domain, "find_root: f is NaN at bracket end");
  if (fa == 0) return a;
  if (fb == 0) return b;
  if ((fa > 0) == (fb > 0)) {
    fail(ErrorCode::bracket, "find_root: no sign change on [" + std::to_string(a) + ", " +
                                 std::to_string(b) + "]");
  }

  double c = a;
  double fc = fa;
  double d = b - a;
  double e = d;
  for (int iter = 0; iter < bracket.max_iter; ++iter) {
    if ((fb > 0) == (fc > 0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = std::max(2.0 * std::numeric_limits<double>::epsilon() * std::abs(b),
                                std::max(bracket.rel_tol * std::abs(b), bracket.abs_tol));
    const double half = 0.5 * (c - b);
    if (std::abs(half) <= tol || fb == 0) return b;

    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      double p;
      double q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * half * s;
        q = 1.0 - s;
      } else {
        const double qa = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * half * qa * (qa - r) - (b - a) * (r - 1.0));
        q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0) {
        q = -q;
      } else {
        p = -p;
      }
      if (2.0 * p < std::min(3.0 * half * q - std::abs(tol * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = half;
        e = d;
      }
    } else {
      d = half;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol ? d : (half > 0 ? tol : -tol);
    fb = f(b);
    if (std::isnan(fb)) fail(ErrorCode::domain, "find_root: f is NaN inside bracket");
  }
  fail(ErrorCode::convergence, "find_root: max_iter exceeded");
}

}  // namespace heavycomb
