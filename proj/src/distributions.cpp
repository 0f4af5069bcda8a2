#include "heavycomb/distributions.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "heavycomb/errors.hpp"
#include "heavycomb/special_functions.hpp"

namespace heavycomb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

void require_positive_index(double gamma, const char* family) {
  if (!(gamma > 0) || !std::isfinite(gamma)) {
    fail(ErrorCode::domain, std::string(family) + ": tail index must be positive and finite");
  }
}

double cauchy_survival(double x) {
  if (x > 0) return std::atan(1.0 / x) / kPi;
  return 0.5 - std::atan(x) / kPi;
}

// Q_C(1 - q) for q in (0, 1].
double cauchy_upper(double q) {
  if (q == 0.5) return 0.0;
  if (q == 1.0) return -kInf;
  if (q < 0.5) return 1.0 / std::tan(kPi * q);
  return -1.0 / std::tan(kPi * (1.0 - q));
}

double t2_upper(double q) {
  if (q == 0.5) return 0.0;
  if (q == 1.0) return -kInf;
  return (1.0 - 2.0 * q) / std::sqrt(2.0 * q * (1.0 - q));
}

// Grows [lo, hi] around `start` until h changes sign, h increasing.
std::pair<double, double> bracket_increasing(const auto& h, double start, double step) {
  double lo = start - step;
  double hi = start + step;
  for (int i = 0; i < 200 && h(lo) > 0; ++i) {
    hi = lo;
    step *= 2.0;
    lo -= step;
  }
  for (int i = 0; i < 200 && h(hi) < 0; ++i) {
    lo = hi;
    step *= 2.0;
    hi += step;
  }
  if (!(h(lo) <= 0 && h(hi) >= 0)) fail(ErrorCode::convergence, "quantile: failed to bracket root");
  return {lo, hi};
}

double student_t_upper_general(double q, double dof) {
  const double log_q = std::log(q);
  const auto h = [&](double x) { return log_q - std::log(student_t_survival(x, dof)); };
  // Tail asymptote sf(x) ~ dof^{dof/2 - 1} x^{-dof} / B(dof/2, 1/2) seeds the bracket.
  const double log_beta = log_gamma(0.5 * dof) + log_gamma(0.5) - log_gamma(0.5 * dof + 0.5);
  const double guess = std::exp(((0.5 * dof - 1.0) * std::log(dof) - log_beta - log_q) / dof);
  double lo = 0.0;
  double hi = std::max(1.0, 2.0 * guess);
  for (int i = 0; i < 2000 && h(hi) < 0; ++i) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) fail(ErrorCode::convergence, "student_t quantile: bracket overflow");
  }
  if (h(lo) > 0) lo = 0.0;
  return find_root(h, RootBracket{lo, hi, 1e-15, 1e-300, 400});
}

// Q_t(1 - q) with dof degrees of freedom, q in (0, 1].
double student_t_upper(double q, double dof) {
  if (q == 0.5) return 0.0;
  if (q == 1.0) return -kInf;
  if (q > 0.5) return -student_t_upper(1.0 - q, dof);
  if (dof == 1.0) return cauchy_upper(q);
  if (dof == 2.0) return t2_upper(q);
  return student_t_upper_general(q, dof);
}

double levy_survival(double x) {
  if (x <= 0) return 1.0;
  return std::erf(1.0 / std::sqrt(2.0 * x));
}

double levy_cdf(double x) {
  if (x <= 0) return 0.0;
  return std::erfc(1.0 / std::sqrt(2.0 * x));
}

double power_survival(double x, double gamma) {
  if (x <= 1) return 1.0;
  return std::exp(-gamma * std::log(x));
}

double power_cdf(double x, double gamma) {
  if (x <= 1) return 0.0;
  return -std::expm1(-gamma * std::log(x));
}

double inverse_gamma_upper(double q, double shape) {
  // sf(x) = P(shape, 1/x); solve in t = log(1/x).
  const double log_q = std::log(q);
  const auto h = [&](double t) { return std::log(reg_gamma_lower(shape, std::exp(t))) - log_q; };
  const double start = (log_q + log_gamma(shape + 1.0)) / shape;
  const auto [lo, hi] = bracket_increasing(h, std::min(start, std::log(shape + 1.0)), 1.0);
  return std::exp(-find_root(h, RootBracket{lo, hi, 1e-15, 1e-15, 400}));
}

double inverse_gamma_lower(double u, double shape) {
  // cdf(x) = Q(shape, 1/x); in t = log(1/x) this is decreasing, so negate.
  const double log_u = std::log(u);
  const auto h = [&](double t) { return log_u - std::log(reg_gamma_upper(shape, std::exp(t))); };
  const double start = std::log(std::max(shape, -log_u));
  const auto [lo, hi] = bracket_increasing(h, start, 1.0);
  return std::exp(-find_root(h, RootBracket{lo, hi, 1e-15, 1e-15, 400}));
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_number(std::string_view text, std::string_view whole) {
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    fail(ErrorCode::usage, "invalid number '" + std::string(text) + "' in distribution spec '" +
                               std::string(whole) + "'");
  }
  return value;
}

}  // namespace

double student_t_survival(double x, double dof) {
  if (std::isnan(x)) fail(ErrorCode::domain, "student_t_survival: NaN");
  if (!(dof > 0) || !std::isfinite(dof)) fail(ErrorCode::domain, "student_t_survival: dof must be > 0");
  if (x == kInf) return 0.0;
  if (x == -kInf) return 1.0;
  if (x == 0.0) return 0.5;
  if (x < 0) {
    // 1 - sf(|x|), formed from the complementary piece to avoid cancellation.
    if (dof == 1.0) return 0.5 + std::atan(-x) / kPi;
    if (dof == 2.0) return 1.0 - student_t_survival(-x, dof);
    const double x2 = x * x;
    const auto pair = std::isinf(x2) ? detail::BetaPair{0.0, 1.0}
                                     : detail::reg_beta_pair(dof / (x2 + dof), x2 / (x2 + dof),
                                                             0.5 * dof, 0.5);
    return 0.5 + 0.5 * pair.upper;
  }
  if (dof == 1.0) return cauchy_survival(x);
  if (dof == 2.0) {
    const double s = std::hypot(x, std::numbers::sqrt2);
    return 1.0 / (s * (s + x));
  }
  const double x2 = x * x;
  if (std::isinf(x2)) {
    const double z = (dof / x) / x;
    return 0.5 * detail::reg_beta_pair(z, 1.0, 0.5 * dof, 0.5).lower;
  }
  return 0.5 * detail::reg_beta_pair(dof / (x2 + dof), x2 / (x2 + dof), 0.5 * dof, 0.5).lower;
}

double student_t_cdf(double x, double dof) { return student_t_survival(-x, dof); }

double truncation_point(double gamma, double p0) {
  require_positive_index(gamma, "truncation_point");
  if (!(p0 > 0 && p0 < 1)) fail(ErrorCode::domain, "truncation_point: p0 must lie in (0, 1)");
  return student_t_upper(p0, gamma);
}

HeavyTailDistribution HeavyTailDistribution::cauchy() { return {Family::cauchy, 1.0}; }
HeavyTailDistribution HeavyTailDistribution::log_cauchy() { return {Family::log_cauchy, 0.0}; }
HeavyTailDistribution HeavyTailDistribution::levy() { return {Family::levy, 0.5}; }

HeavyTailDistribution HeavyTailDistribution::pareto(double gamma) {
  require_positive_index(gamma, "pareto");
  return {Family::pareto, gamma};
}

HeavyTailDistribution HeavyTailDistribution::frechet(double gamma) {
  require_positive_index(gamma, "frechet");
  return {Family::frechet, gamma};
}

HeavyTailDistribution HeavyTailDistribution::inverse_gamma(double gamma) {
  require_positive_index(gamma, "inverse_gamma");
  return {Family::inverse_gamma, gamma};
}

HeavyTailDistribution HeavyTailDistribution::log_gamma(double gamma) {
  require_positive_index(gamma, "log_gamma");
  return {Family::log_gamma, gamma};
}

HeavyTailDistribution HeavyTailDistribution::student_t(double gamma) {
  require_positive_index(gamma, "student_t");
  return {Family::student_t, gamma};
}

HeavyTailDistribution HeavyTailDistribution::truncated_t(double gamma, double p0) {
  HeavyTailDistribution d(Family::truncated_t, gamma);
  d.c_ = heavycomb::truncation_point(gamma, p0);
  d.p0_ = p0;
  d.parent_survival_at_c_ = student_t_survival(d.c_, gamma);
  return d;
}

double HeavyTailDistribution::support_lower() const noexcept {
  switch (family_) {
    case Family::cauchy:
    case Family::student_t: return -kInf;
    case Family::log_cauchy:
    case Family::levy:
    case Family::frechet:
    case Family::inverse_gamma: return 0.0;
    case Family::pareto:
    case Family::log_gamma: return 1.0;
    case Family::truncated_t: return c_;
  }
  return -kInf;
}

double HeavyTailDistribution::survival(double x) const {
  if (std::isnan(x)) fail(ErrorCode::domain, "survival: NaN argument");
  switch (family_) {
    case Family::cauchy: return cauchy_survival(x);
    case Family::log_cauchy:
      if (x <= 0) return 1.0;
      return cauchy_survival(std::log(x));
    case Family::levy: return levy_survival(x);
    case Family::pareto:
    case Family::log_gamma: return power_survival(x, gamma_);
    case Family::frechet:
      if (x <= 0) return 1.0;
      return -std::expm1(-std::pow(x, -gamma_));
    case Family::inverse_gamma:
      if (x <= 0) return 1.0;
      return reg_gamma_lower(gamma_, 1.0 / x);
    case Family::student_t: return student_t_survival(x, gamma_);
    case Family::truncated_t:
      if (x <= c_) return 1.0;
      return std::min(1.0, student_t_survival(x, gamma_) / parent_survival_at_c_);
  }
  return 1.0;
}

double HeavyTailDistribution::cdf(double x) const {
  if (std::isnan(x)) fail(ErrorCode::domain, "cdf: NaN argument");
  switch (family_) {
    case Family::cauchy: return cauchy_survival(-x);
    case Family::log_cauchy:
      if (x <= 0) return 0.0;
      return cauchy_survival(-std::log(x));
    case Family::levy: return levy_cdf(x);
    case Family::pareto:
    case Family::log_gamma: return power_cdf(x, gamma_);
    case Family::frechet:
      if (x <= 0) return 0.0;
      return std::exp(-std::pow(x, -gamma_));
    case Family::inverse_gamma:
      if (x <= 0) return 0.0;
      return reg_gamma_upper(gamma_, 1.0 / x);
    case Family::student_t: return student_t_cdf(x, gamma_);
    case Family::truncated_t: {
      if (x <= c_) return 0.0;
      const double mass = parent_survival_at_c_ - student_t_survival(x, gamma_);
      return std::clamp(mass / parent_survival_at_c_, 0.0, 1.0);
    }
  }
  return 0.0;
}

double HeavyTailDistribution::upper_tail_quantile(double q) const {
  switch (family_) {
    case Family::cauchy: return cauchy_upper(q);
    case Family::log_cauchy: return std::exp(cauchy_upper(q));
    case Family::levy: {
      const double z = erf_inv(q);
      return 1.0 / (2.0 * z * z);
    }
    case Family::pareto:
    case Family::log_gamma: return std::exp(-std::log(q) / gamma_);
    case Family::frechet: return std::pow(-std::log1p(-q), -1.0 / gamma_);
    case Family::inverse_gamma: return inverse_gamma_upper(q, gamma_);
    case Family::student_t: return student_t_upper(q, gamma_);
    case Family::truncated_t:
      return std::max(c_, student_t_upper(q * parent_survival_at_c_, gamma_));
  }
  return kInf;
}

double HeavyTailDistribution::lower_tail_quantile(double u) const {
  switch (family_) {
    case Family::cauchy: return -cauchy_upper(u);
    case Family::log_cauchy: return std::exp(-cauchy_upper(u));
    case Family::levy: {
      const double z = normal_upper_quantile(0.5 * u) / std::numbers::sqrt2;
      return 1.0 / (2.0 * z * z);
    }
    case Family::pareto:
    case Family::log_gamma: return std::exp(-std::log1p(-u) / gamma_);
    case Family::frechet: return std::pow(-std::log(u), -1.0 / gamma_);
    case Family::inverse_gamma: return inverse_gamma_lower(u, gamma_);
    case Family::student_t: return -student_t_upper(u, gamma_);
    case Family::truncated_t:
      return std::max(c_, student_t_upper(parent_survival_at_c_ * (1.0 - u), gamma_));
  }
  return -kInf;
}

double HeavyTailDistribution::quantile(double u) const {
  if (std::isnan(u) || !(u > 0 && u < 1)) fail(ErrorCode::domain, "quantile: u must lie in (0, 1)");
  if (u < 0.5) return lower_tail_quantile(u);
  return upper_tail_quantile(1.0 - u);
}

double HeavyTailDistribution::upper_quantile(double q) const {
  if (std::isnan(q) || !(q > 0 && q <= 1)) {
    fail(ErrorCode::domain, "upper_quantile: q must lie in (0, 1]");
  }
  if (q == 1.0) return support_lower();
  if (q <= 0.5) return upper_tail_quantile(q);
  return lower_tail_quantile(1.0 - q);
}

std::string HeavyTailDistribution::spec() const {
  switch (family_) {
    case Family::cauchy: return "cauchy";
    case Family::log_cauchy: return "log_cauchy";
    case Family::levy: return "levy";
    case Family::pareto: return "pareto:" + format_number(gamma_);
    case Family::frechet: return "frechet:" + format_number(gamma_);
    case Family::inverse_gamma: return "inv_gamma:" + format_number(gamma_);
    case Family::log_gamma: return "log_gamma:" + format_number(gamma_);
    case Family::student_t: return "t:" + format_number(gamma_);
    case Family::truncated_t: return "trunc_t:" + format_number(gamma_) + ":" + format_number(p0_);
  }
  return "?";
}

std::string_view family_name(Family family) noexcept {
  switch (family) {
    case Family::cauchy: return "cauchy";
    case Family::log_cauchy: return "log_cauchy";
    case Family::levy: return "levy";
    case Family::pareto: return "pareto";
    case Family::frechet: return "frechet";
    case Family::inverse_gamma: return "inv_gamma";
    case Family::log_gamma: return "log_gamma";
    case Family::student_t: return "t";
    case Family::truncated_t: return "trunc_t";
  }
  return "?";
}

HeavyTailDistribution parse_distribution(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(':', start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  const std::string_view name = parts.front();
  const auto expect_args = [&](std::size_t count) {
    if (parts.size() != count + 1) {
      fail(ErrorCode::usage, "distribution '" + std::string(name) + "' takes " +
                                 std::to_string(count) + " parameter(s): '" + std::string(text) + "'");
    }
  };
  try {
    if (name == "cauchy") {
      expect_args(0);
      return HeavyTailDistribution::cauchy();
    }
    if (name == "log_cauchy") {
      expect_args(0);
      return HeavyTailDistribution::log_cauchy();
    }
    if (name == "levy") {
      expect_args(0);
      return HeavyTailDistribution::levy();
    }
    if (name == "pareto" || name == "frechet" || name == "inv_gamma" || name == "log_gamma" ||
        name == "t") {
      expect_args(1);
      const double gamma = parse_number(parts[1], text);
      if (name == "pareto") return HeavyTailDistribution::pareto(gamma);
      if (name == "frechet") return HeavyTailDistribution::frechet(gamma);
      if (name == "inv_gamma") return HeavyTailDistribution::inverse_gamma(gamma);
      if (name == "log_gamma") return HeavyTailDistribution::log_gamma(gamma);
      return HeavyTailDistribution::student_t(gamma);
    }
    if (name == "trunc_t") {
      expect_args(2);
      return HeavyTailDistribution::truncated_t(parse_number(parts[1], text),
                                                parse_number(parts[2], text));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::usage) throw;
    fail(ErrorCode::usage, "invalid distribution spec '" + std::string(text) + "': " + e.what());
  }
  fail(ErrorCode::usage, "unknown distribution '" + std::string(text) + "'");
}

}  // namespace heavycomb
