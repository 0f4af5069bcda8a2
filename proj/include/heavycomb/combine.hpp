#pragma once

// Global tests on a vector of p-values: heavy-tailed combination tests
// (standard, average, weighted), weighted Bonferroni and its max-statistic
// form, Fisher's method and the Benjamini-Hochberg adjustment.

#include <Eigen/Core>
#include <optional>
#include <string>

#include "heavycomb/distributions.hpp"

namespace heavycomb {

using PValues = Eigen::Ref<const Eigen::VectorXd>;
using Weights = Eigen::Ref<const Eigen::VectorXd>;

/// Value substituted for Q_F(0) = -inf when p = 1 and F is unbounded below.
inline constexpr double kSaturatedQuantile = -1e300;

struct CombinedResult {
  double statistic = 0.0;
  double combined_p = 1.0;
  std::string method_label;
  double kappa = 0.0;           // sum of w_i^gamma; n for the standard test
  int saturated = 0;            // p_i = 1 mapped to kSaturatedQuantile
  bool weights_normalized = false;
};

/// Throws domain unless p is nonempty with every entry in (0, 1].
void validate_pvalues(PValues p);

/// X_i = Q_F(1 - p_i). `saturated`, if given, receives the number of entries
/// clamped to kSaturatedQuantile.
Eigen::VectorXd transform(PValues p, const HeavyTailDistribution& d, int* saturated = nullptr);

CombinedResult combine_standard(PValues p, const HeavyTailDistribution& d);
/// Requires tail_index(d) == 1.
CombinedResult combine_average(PValues p, const HeavyTailDistribution& d);
CombinedResult combine_weighted(PValues p, Weights w, const HeavyTailDistribution& d);

/// Equal-weight Bonferroni, combined p = min(1, n min p_i).
CombinedResult bonferroni(PValues p);
/// Weighted Bonferroni; weights are rescaled to sum to 1 when they do not.
CombinedResult bonferroni(PValues p, Weights w);

/// 1{max w_i X_i > Q_F(1 - alpha/kappa)}, kappa = sum w_i^gamma, with w
/// first rescaled to max w_i = 1.
bool bonferroni_as_max_statistic(PValues p, Weights w, const HeavyTailDistribution& d,
                                 double alpha);
/// w_i^gamma / sum_j w_j^gamma.
Eigen::VectorXd mapped_bonferroni_weights(Weights w, double gamma);

CombinedResult fisher(PValues p);

/// Step-up BH adjusted p-values in the original order.
Eigen::VectorXd bh_adjust(PValues p);

/// Q_F(1 - alpha/kappa), or the support lower bound when alpha/kappa >= 1.
double combination_threshold(const HeavyTailDistribution& d, double alpha, double kappa);

/// Rejection probability of the standard test when all n p-values coincide:
/// F̄(Q_F(1 - alpha/n) / n).
double perfect_correlation_rejection_probability(const HeavyTailDistribution& d, int n,
                                                 double alpha);

enum class MethodKind { standard, average, weighted, bonferroni, fisher, minp };

/// A test plus its parameters. `weights` empty means equal weights.
/// `cutoff` is the calibrated threshold on min p_i for minp.
struct CombinationMethod {
  MethodKind kind = MethodKind::standard;
  std::optional<HeavyTailDistribution> distribution;
  Eigen::VectorXd weights;
  double cutoff = 0.0;

  static CombinationMethod standard(HeavyTailDistribution d);
  static CombinationMethod average(HeavyTailDistribution d);
  static CombinationMethod weighted(HeavyTailDistribution d, Eigen::VectorXd w);
  static CombinationMethod bonferroni(Eigen::VectorXd w = {});
  static CombinationMethod fisher();
  static CombinationMethod minp(double cutoff);

  std::string label() const;
  /// Throws if the method is incompatible with n p-values.
  void validate(int n) const;
  CombinedResult apply(PValues p) const;
};

/// A method fixed at a dimension n and level alpha, with thresholds
/// precomputed so repeated decisions are cheap.
class DecisionRule {
 public:
  DecisionRule(const CombinationMethod& method, int n, double alpha);

  bool rejects(PValues p) const;
  /// Decision from an already transformed vector (heavy-tailed methods only).
  bool rejects_transformed(PValues p, PValues x) const;
  double threshold() const noexcept { return threshold_; }

 private:
  CombinationMethod method_;
  int n_;
  double alpha_;
  double threshold_ = 0.0;
  Eigen::VectorXd weights_;
};

std::string_view method_kind_name(MethodKind kind) noexcept;

}  // namespace heavycomb
