#include "heavycomb/special_functions.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace heavycomb {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;
constexpr int kMaxSeriesIter = 100000;

void require_finite(double x, const char* who) {
  if (!std::isfinite(x)) fail(ErrorCode::domain, std::string(who) + ": non-finite argument");
}

template <std::size_t N>
double horner(const std::array<double, N>& c, double x) {
  double acc = c[N - 1];
  for (std::size_t i = N - 1; i-- > 0;) acc = acc * x + c[i];
  return acc;
}

// Wichura's AS241 (PPND16). Returns Phi^{-1}(u) for u in (0, 1), ~1e-16 relative.
double as241(double u) {
  static constexpr std::array<double, 8> a = {
      3.387132872796366608,  133.14166789178437745, 1971.5909503065514427,
      13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
      33430.575583588128105, 2509.0809287301226727};
  static constexpr std::array<double, 8> b = {
      1.0,                   42.313330701600911252, 687.1870074920579083,
      5394.1960214247511077, 21213.794301586595867, 39307.89580009271061,
      28729.085735721942674, 5226.495278852545925};
  static constexpr std::array<double, 8> c = {
      1.42343711074968357734,  4.6303378461565452959,   5.7694972214606914055,
      3.64784832476320460504,  1.27045825245236838258,  0.24178072517745061177,
      0.0227238449892691845833, 7.7454501427834140764e-4};
  static constexpr std::array<double, 8> d = {
      1.0,                     2.05319162663775882187,   1.6763848301838038494,
      0.68976733498510000455,  0.14810397642748007459,   0.0151986665636164571966,
      5.475938084995344946e-4, 1.05075007164441684324e-9};
  static constexpr std::array<double, 8> e = {
      6.6579046435011037772,   5.4637849111641143699,    1.7848265399172913358,
      0.29656057182850489123,  0.026532189526576123093,  0.0012426609473880784386,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr std::array<double, 8> f = {
      1.0,                      0.59983220655588793769,   0.13692988092273580531,
      0.0148753612908506148525, 7.868691311456132591e-4,  1.8463183175100546818e-5,
      1.4215117583164458887e-7, 2.04426310338993978564e-15};

  const double q = u - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * horner(a, r) / horner(b, r);
  }
  double r = q < 0 ? u : 1.0 - u;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = horner(c, r) / horner(d, r);
  } else {
    r -= 5.0;
    x = horner(e, r) / horner(f, r);
  }
  return q < 0 ? -x : x;
}

// One Halley step on Phi(x) = u, valid for the lower tail (x <= 0) where
// normal_cdf keeps relative accuracy.
double refine_lower(double x, double u) {
  const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  if (!(density > 0) || !std::isfinite(density)) return x;
  const double t = (0.5 * std::erfc(-x / std::numbers::sqrt2) - u) / density;
  return x - t / (1.0 + 0.5 * x * t);
}

double log_gamma_unchecked(double a) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(a, &sign);
#else
  return std::lgamma(a);
#endif
}

double gamma_series(double s, double x) {
  double ap = s;
  double del = 1.0 / s;
  double sum = del;
  for (int i = 0; i < kMaxSeriesIter; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kEps) {
      return sum * std::exp(-x + s * std::log(x) - log_gamma_unchecked(s));
    }
  }
  fail(ErrorCode::convergence, "incomplete gamma series did not converge");
}

double gamma_continued_fraction(double s, double x) {
  double b = x + 1.0 - s;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxSeriesIter; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) {
      return std::exp(-x + s * std::log(x) - log_gamma_unchecked(s)) * h;
    }
  }
  fail(ErrorCode::convergence, "incomplete gamma continued fraction did not converge");
}

void check_gamma_args(double s, double x, const char* who) {
  if (!(s > 0) || !std::isfinite(s) || std::isnan(x) || x < 0) {
    fail(ErrorCode::domain, std::string(who) + ": requires s > 0 and x >= 0");
  }
}

double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxSeriesIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  fail(ErrorCode::convergence, "incomplete beta continued fraction did not converge");
}

void check_beta_args(double x, double a, double b, const char* who) {
  if (std::isnan(x) || x < 0 || x > 1 || !(a > 0) || !(b > 0) || !std::isfinite(a) ||
      !std::isfinite(b)) {
    fail(ErrorCode::domain, std::string(who) + ": requires 0 <= x <= 1, a > 0, b > 0");
  }
}

}  // namespace

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::domain: return "domain";
    case ErrorCode::infinite_quantile: return "infinite_quantile";
    case ErrorCode::bracket: return "bracket";
    case ErrorCode::convergence: return "convergence";
    case ErrorCode::shape: return "shape";
    case ErrorCode::method_misuse: return "method_misuse";
    case ErrorCode::capacity: return "capacity";
    case ErrorCode::insufficient_events: return "insufficient_events";
    case ErrorCode::validation: return "validation";
    case ErrorCode::config: return "config";
    case ErrorCode::usage: return "usage";
  }
  return "unknown";
}

double normal_cdf(double x) {
  require_finite(x, "normal_cdf");
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_sf(double x) {
  require_finite(x, "normal_sf");
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

double normal_quantile(double u) {
  if (std::isnan(u) || u < 0 || u > 1) fail(ErrorCode::domain, "normal_quantile: u outside [0, 1]");
  if (u == 0 || u == 1) fail(ErrorCode::infinite_quantile, "normal_quantile: u in {0, 1}");
  if (u == 0.5) return 0.0;
  // Work on the lower tail, where u is exact and the refinement is well conditioned.
  if (u < 0.5) return refine_lower(as241(u), u);
  const double q = 1.0 - u;
  return -refine_lower(as241(q), q);
}

double normal_upper_quantile(double q) { return -normal_quantile(q); }

double erf_inv(double y) {
  if (std::isnan(y) || y <= -1 || y >= 1) {
    if (y == 1 || y == -1) fail(ErrorCode::infinite_quantile, "erf_inv: |y| = 1");
    fail(ErrorCode::domain, "erf_inv: y outside (-1, 1)");
  }
  if (y == 0) return 0.0;
  const double ay = std::abs(y);
  double z;
  if (ay >= 0.5) {
    // erfc(z) = 1 - ay, exact for ay >= 0.5.
    const double target = 1.0 - ay;
    z = normal_upper_quantile(0.5 * target) / std::numbers::sqrt2;
    for (int i = 0; i < 2; ++i) {
      const double fprime = -2.0 / std::sqrt(std::numbers::pi) * std::exp(-z * z);
      if (fprime == 0) break;
      const double t = (std::erfc(z) - target) / fprime;
      z -= t / (1.0 + z * t);
    }
  } else {
    z = ay < 1e-3 ? 0.5 * std::sqrt(std::numbers::pi) * ay * (1.0 + std::numbers::pi * ay * ay / 12.0)
                  : normal_upper_quantile(0.5 * (1.0 - ay)) / std::numbers::sqrt2;
    for (int i = 0; i < 2; ++i) {
      const double fprime = 2.0 / std::sqrt(std::numbers::pi) * std::exp(-z * z);
      const double t = (std::erf(z) - ay) / fprime;
      z -= t / (1.0 + z * t);
    }
  }
  return y < 0 ? -z : z;
}

double log_gamma(double a) {
  if (!(a > 0) || !std::isfinite(a)) fail(ErrorCode::domain, "log_gamma: requires a > 0");
  return log_gamma_unchecked(a);
}

double reg_gamma_lower(double s, double x) {
  check_gamma_args(s, x, "reg_gamma_lower");
  if (x == 0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < s + 1.0) return gamma_series(s, x);
  return 1.0 - gamma_continued_fraction(s, x);
}

double reg_gamma_upper(double s, double x) {
  check_gamma_args(s, x, "reg_gamma_upper");
  if (x == 0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < s + 1.0) return 1.0 - gamma_series(s, x);
  return gamma_continued_fraction(s, x);
}

namespace detail {

BetaPair reg_beta_pair(double x, double y, double a, double b) {
  if (x <= 0) return {0.0, 1.0};
  if (y <= 0) return {1.0, 0.0};
  const double log_front = log_gamma_unchecked(a + b) - log_gamma_unchecked(a) -
                           log_gamma_unchecked(b) + a * std::log(x) + b * std::log(y);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    const double lower = front * beta_continued_fraction(a, b, x) / a;
    return {lower, 1.0 - lower};
  }
  const double upper = front * beta_continued_fraction(b, a, y) / b;
  return {1.0 - upper, upper};
}

}  // namespace detail

double reg_beta(double x, double a, double b) {
  check_beta_args(x, a, b, "reg_beta");
  return detail::reg_beta_pair(x, 1.0 - x, a, b).lower;
}

double reg_beta_complement(double x, double a, double b) {
  check_beta_args(x, a, b, "reg_beta_complement");
  return detail::reg_beta_pair(x, 1.0 - x, a, b).upper;
}

}  // namespace heavycomb
