#pragma once

#include <string>
#include <string_view>

namespace heavycomb {

enum class Family {
  cauchy,
  log_cauchy,
  levy,
  pareto,
  frechet,
  inverse_gamma,
  log_gamma,
  student_t,
  truncated_t,
};

/**
 * A regularly varying distribution used to transform p-values, X = Q_F(1 - p).
 *
 * Immutable after construction. Every family reports its survival function,
 * CDF, quantile, tail index and the lower end of its support. For each family
 * the smaller of survival/CDF is computed directly, so tails stay accurate far
 * below 1e-16.
 *
 * Notes on two entries:
 *  - log_gamma(gamma) has survival x^{-gamma} on [1, inf) and therefore
 *    coincides with pareto(gamma); it is kept as a separate family.
 *  - log_cauchy uses survival 1/2 - atan(ln x)/pi on (0, inf). Its quantile
 *    overflows double for u > 1 - 4.48e-4 and returns +inf there.
 */
class HeavyTailDistribution {
 public:
  static HeavyTailDistribution cauchy();
  static HeavyTailDistribution log_cauchy();
  static HeavyTailDistribution levy();
  static HeavyTailDistribution pareto(double gamma);
  static HeavyTailDistribution frechet(double gamma);
  static HeavyTailDistribution inverse_gamma(double gamma);
  static HeavyTailDistribution log_gamma(double gamma);
  static HeavyTailDistribution student_t(double gamma);
  static HeavyTailDistribution truncated_t(double gamma, double p0);

  Family family() const noexcept { return family_; }
  double tail_index() const noexcept { return gamma_; }
  /// Truncation threshold p0; only meaningful for truncated_t.
  double truncation_threshold() const noexcept { return p0_; }
  /// Truncation point c = Q_t(1 - p0); only meaningful for truncated_t.
  double truncation_point() const noexcept { return c_; }
  /// Infimum of the support (-inf for cauchy and student_t).
  double support_lower() const noexcept;

  /// 1 - F(x). Returns 1 below the support, 0 at +inf. NaN throws domain.
  double survival(double x) const;
  double cdf(double x) const;
  /// Q_F(u) = inf{x : u <= F(x)} for u in (0, 1).
  double quantile(double u) const;
  /// Q_F(1 - q) evaluated from q. Defined on (0, 1]; q = 1 gives the support
  /// lower bound (-inf for families unbounded below).
  double upper_quantile(double q) const;

  /// Textual form accepted by parse_distribution, e.g. "trunc_t:1:0.9".
  std::string spec() const;

  friend bool operator==(const HeavyTailDistribution&, const HeavyTailDistribution&) = default;

 private:
  HeavyTailDistribution(Family family, double gamma) : family_(family), gamma_(gamma) {}

  double lower_tail_quantile(double u) const;  // accurate for small u
  double upper_tail_quantile(double q) const;  // accurate for small q

  Family family_;
  double gamma_;
  double p0_ = 0.0;
  double c_ = 0.0;
  double parent_survival_at_c_ = 1.0;
};

/// c = Q_{t,gamma}(1 - p0), the truncation point for a left-truncated t.
double truncation_point(double gamma, double p0);

/// Student t survival with `dof` degrees of freedom (any real dof > 0).
double student_t_survival(double x, double dof);
double student_t_cdf(double x, double dof);

/// Parses `cauchy`, `log_cauchy`, `levy`, `pareto:g`, `frechet:g`,
/// `inv_gamma:g`, `log_gamma:g`, `t:g`, `trunc_t:g:p0`. Throws usage on
/// anything else.
HeavyTailDistribution parse_distribution(std::string_view text);

std::string_view family_name(Family family) noexcept;

}  // namespace heavycomb
