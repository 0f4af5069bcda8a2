#include "heavycomb/combine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "heavycomb/errors.hpp"
#include "heavycomb/special_functions.hpp"

namespace heavycomb {

namespace {

constexpr double kMinP = std::numeric_limits<double>::min();

double clamp_p(double raw) { return std::clamp(raw, kMinP, 1.0); }

void validate_weights(Weights w, Eigen::Index n, const char* who) {
  if (w.size() != n) {
    fail(ErrorCode::shape, std::string(who) + ": " + std::to_string(w.size()) + " weights for " +
                               std::to_string(n) + " p-values");
  }
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0) || !std::isfinite(w[i])) {
      fail(ErrorCode::domain, std::string(who) + ": weights must be positive and finite");
    }
  }
}

double kappa_of(Weights w, double gamma) {
  if (gamma == 1.0) return w.sum();
  return w.array().pow(gamma).sum();
}

std::string with_dist(std::string_view kind, const HeavyTailDistribution& d) {
  return std::string(kind) + ":" + d.spec();
}

}  // namespace

void validate_pvalues(PValues p) {
  if (p.size() == 0) fail(ErrorCode::domain, "empty p-value vector");
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (std::isnan(p[i]) || !(p[i] > 0 && p[i] <= 1)) {
      fail(ErrorCode::domain, "p-value " + std::to_string(p[i]) + " at position " +
                                  std::to_string(i + 1) + " outside (0, 1]");
    }
  }
}

Eigen::VectorXd transform(PValues p, const HeavyTailDistribution& d, int* saturated) {
  validate_pvalues(p);
  Eigen::VectorXd x(p.size());
  int count = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    x[i] = d.upper_quantile(p[i]);
    if (x[i] == -std::numeric_limits<double>::infinity()) {
      x[i] = kSaturatedQuantile;
      ++count;
    }
  }
  if (saturated != nullptr) *saturated = count;
  return x;
}

CombinedResult combine_standard(PValues p, const HeavyTailDistribution& d) {
  CombinedResult r;
  const Eigen::VectorXd x = transform(p, d, &r.saturated);
  const double n = static_cast<double>(p.size());
  r.statistic = x.sum();
  r.kappa = n;
  r.combined_p = clamp_p(n * d.survival(r.statistic));
  r.method_label = with_dist("standard", d);
  return r;
}

CombinedResult combine_average(PValues p, const HeavyTailDistribution& d) {
  if (d.tail_index() != 1.0) {
    fail(ErrorCode::method_misuse, "average test requires tail index 1, got " + d.spec());
  }
  CombinedResult r;
  const Eigen::VectorXd x = transform(p, d, &r.saturated);
  r.statistic = x.sum() / static_cast<double>(p.size());
  r.kappa = 1.0;
  r.combined_p = clamp_p(d.survival(r.statistic));
  r.method_label = with_dist("average", d);
  return r;
}

CombinedResult combine_weighted(PValues p, Weights w, const HeavyTailDistribution& d) {
  validate_weights(w, p.size(), "combine_weighted");
  CombinedResult r;
  const Eigen::VectorXd x = transform(p, d, &r.saturated);
  r.statistic = (w.array() * x.array()).sum();
  r.kappa = kappa_of(w, d.tail_index());
  r.combined_p = clamp_p(r.kappa * d.survival(r.statistic));
  r.method_label = with_dist("weighted", d);
  return r;
}

CombinedResult bonferroni(PValues p) {
  validate_pvalues(p);
  CombinedResult r;
  r.statistic = static_cast<double>(p.size()) * p.minCoeff();
  r.combined_p = clamp_p(r.statistic);
  r.kappa = static_cast<double>(p.size());
  r.method_label = "bonferroni";
  return r;
}

CombinedResult bonferroni(PValues p, Weights w) {
  validate_pvalues(p);
  validate_weights(w, p.size(), "bonferroni");
  CombinedResult r;
  const double total = w.sum();
  Eigen::VectorXd omega = w;
  if (std::abs(total - 1.0) > 1e-12) {
    omega /= total;
    r.weights_normalized = true;
  }
  r.statistic = (p.array() / omega.array()).minCoeff();
  r.combined_p = clamp_p(r.statistic);
  r.kappa = 1.0;
  r.method_label = "bonferroni";
  return r;
}

Eigen::VectorXd mapped_bonferroni_weights(Weights w, double gamma) {
  Eigen::VectorXd mapped = gamma == 1.0 ? Eigen::VectorXd(w) : Eigen::VectorXd(w.array().pow(gamma));
  return mapped / mapped.sum();
}

bool bonferroni_as_max_statistic(PValues p, Weights w, const HeavyTailDistribution& d,
                                 double alpha) {
  validate_weights(w, p.size(), "bonferroni_as_max_statistic");
  const Eigen::VectorXd x = transform(p, d);
  // Bonferroni is invariant to rescaling w; max weight 1 keeps alpha/kappa < 1.
  const Eigen::VectorXd scaled = w / w.maxCoeff();
  const double kappa = kappa_of(scaled, d.tail_index());
  return (scaled.array() * x.array()).maxCoeff() > combination_threshold(d, alpha, kappa);
}

CombinedResult fisher(PValues p) {
  validate_pvalues(p);
  CombinedResult r;
  r.statistic = -2.0 * p.array().log().sum() + 0.0;
  r.combined_p = clamp_p(reg_gamma_upper(static_cast<double>(p.size()), 0.5 * r.statistic));
  r.method_label = "fisher";
  return r;
}

Eigen::VectorXd bh_adjust(PValues p) {
  validate_pvalues(p);
  const Eigen::Index m = p.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  Eigen::VectorXd adjusted(m);
  double running = 1.0;
  for (Eigen::Index j = m; j >= 1; --j) {
    const Eigen::Index idx = order[static_cast<std::size_t>(j - 1)];
    running = std::min(running, static_cast<double>(m) * p[idx] / static_cast<double>(j));
    adjusted[idx] = running;
  }
  return adjusted;
}

double combination_threshold(const HeavyTailDistribution& d, double alpha, double kappa) {
  if (!(alpha > 0 && alpha < 1)) fail(ErrorCode::domain, "alpha must lie in (0, 1)");
  const double q = alpha / kappa;
  if (q >= 1.0) return d.support_lower();
  return d.upper_quantile(q);
}

double perfect_correlation_rejection_probability(const HeavyTailDistribution& d, int n,
                                                 double alpha) {
  if (n < 1) fail(ErrorCode::domain, "n must be positive");
  return d.survival(combination_threshold(d, alpha, n) / n);
}

CombinationMethod CombinationMethod::standard(HeavyTailDistribution d) {
  return {MethodKind::standard, d, {}, 0.0};
}

CombinationMethod CombinationMethod::average(HeavyTailDistribution d) {
  return {MethodKind::average, d, {}, 0.0};
}

CombinationMethod CombinationMethod::weighted(HeavyTailDistribution d, Eigen::VectorXd w) {
  return {MethodKind::weighted, d, std::move(w), 0.0};
}

CombinationMethod CombinationMethod::bonferroni(Eigen::VectorXd w) {
  return {MethodKind::bonferroni, std::nullopt, std::move(w), 0.0};
}

CombinationMethod CombinationMethod::fisher() { return {MethodKind::fisher, std::nullopt, {}, 0.0}; }

CombinationMethod CombinationMethod::minp(double cutoff) {
  return {MethodKind::minp, std::nullopt, {}, cutoff};
}

std::string_view method_kind_name(MethodKind kind) noexcept {
  switch (kind) {
    case MethodKind::standard: return "standard";
    case MethodKind::average: return "average";
    case MethodKind::weighted: return "weighted";
    case MethodKind::bonferroni: return "bonferroni";
    case MethodKind::fisher: return "fisher";
    case MethodKind::minp: return "minp";
  }
  return "?";
}

std::string CombinationMethod::label() const {
  if (distribution) return with_dist(method_kind_name(kind), *distribution);
  return std::string(method_kind_name(kind));
}

void CombinationMethod::validate(int n) const {
  switch (kind) {
    case MethodKind::standard:
    case MethodKind::average:
    case MethodKind::weighted:
      if (!distribution) fail(ErrorCode::config, label() + ": distribution required");
      if (kind == MethodKind::average && distribution->tail_index() != 1.0) {
        fail(ErrorCode::method_misuse, "average test requires tail index 1, got " +
                                           distribution->spec());
      }
      break;
    case MethodKind::minp:
      if (!(cutoff > 0 && cutoff <= 1)) fail(ErrorCode::config, "minp: cutoff must lie in (0, 1]");
      break;
    default: break;
  }
  if (kind == MethodKind::weighted && weights.size() == 0) {
    fail(ErrorCode::config, "weighted: weights required");
  }
  if (weights.size() != 0) validate_weights(weights, n, label().c_str());
}

CombinedResult CombinationMethod::apply(PValues p) const {
  validate(static_cast<int>(p.size()));
  switch (kind) {
    case MethodKind::standard: return combine_standard(p, *distribution);
    case MethodKind::average: return combine_average(p, *distribution);
    case MethodKind::weighted: return combine_weighted(p, weights, *distribution);
    case MethodKind::bonferroni:
      return weights.size() == 0 ? heavycomb::bonferroni(p) : heavycomb::bonferroni(p, weights);
    case MethodKind::fisher: return heavycomb::fisher(p);
    case MethodKind::minp: {
      validate_pvalues(p);
      CombinedResult r;
      r.statistic = p.minCoeff();
      r.combined_p = r.statistic <= cutoff ? r.statistic : 1.0;
      r.method_label = label();
      return r;
    }
  }
  fail(ErrorCode::config, "unknown method");
}

DecisionRule::DecisionRule(const CombinationMethod& method, int n, double alpha)
    : method_(method), n_(n), alpha_(alpha) {
  if (!(alpha > 0 && alpha < 1)) fail(ErrorCode::domain, "alpha must lie in (0, 1)");
  method_.validate(n);
  switch (method_.kind) {
    case MethodKind::standard:
      threshold_ = combination_threshold(*method_.distribution, alpha, n);
      break;
    case MethodKind::average:
      threshold_ = combination_threshold(*method_.distribution, alpha, 1.0);
      break;
    case MethodKind::weighted:
      threshold_ = combination_threshold(*method_.distribution, alpha,
                                         kappa_of(method_.weights, method_.distribution->tail_index()));
      break;
    case MethodKind::bonferroni:
      if (method_.weights.size() != 0) weights_ = method_.weights / method_.weights.sum();
      threshold_ = alpha;
      break;
    case MethodKind::fisher: threshold_ = alpha; break;
    case MethodKind::minp: threshold_ = method_.cutoff; break;
  }
}

bool DecisionRule::rejects(PValues p) const {
  switch (method_.kind) {
    case MethodKind::standard:
    case MethodKind::average:
    case MethodKind::weighted: return rejects_transformed(p, transform(p, *method_.distribution));
    case MethodKind::bonferroni:
      if (weights_.size() == 0) return static_cast<double>(n_) * p.minCoeff() < alpha_;
      return (p.array() / weights_.array()).minCoeff() < alpha_;
    case MethodKind::fisher: return fisher(p).combined_p < alpha_;
    case MethodKind::minp: return p.minCoeff() <= threshold_;
  }
  return false;
}

bool DecisionRule::rejects_transformed(PValues p, PValues x) const {
  switch (method_.kind) {
    case MethodKind::standard: return x.sum() > threshold_;
    case MethodKind::average: return x.sum() / static_cast<double>(n_) > threshold_;
    case MethodKind::weighted: return (method_.weights.array() * x.array()).sum() > threshold_;
    default: return rejects(p);
  }
}

}  // namespace heavycomb
