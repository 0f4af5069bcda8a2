#include "heavycomb/simulate.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "heavycomb/errors.hpp"
#include "heavycomb/special_functions.hpp"

namespace heavycomb {

namespace {

constexpr double kMinP = std::numeric_limits<double>::min();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_replications(std::int64_t replications) {
  if (replications < 1) fail(ErrorCode::config, "replications must be >= 1");
}

void check_alpha(double alpha) {
  if (!(alpha > 0 && alpha < 1)) fail(ErrorCode::config, "alpha must lie in (0, 1)");
}

double binomial_se(double estimate, std::int64_t replications) {
  return std::sqrt(estimate * (1.0 - estimate) / static_cast<double>(replications));
}

template <typename Body>
auto for_each_replication(const ExchangeableModel& model, Body body) {
  return [&model, body](std::mt19937_64& rng, std::int64_t begin, std::int64_t end) mutable {
    Eigen::VectorXd t(model.n);
    Eigen::VectorXd p(model.n);
    auto state = body.init();
    for (std::int64_t r = begin; r < end; ++r) {
      sample_statistics(model, rng, t);
      statistics_to_pvalues(model, t, p);
      body.visit(state, t, p);
    }
    return state;
  };
}

}  // namespace

void ExchangeableModel::validate() const {
  if (n < 1) fail(ErrorCode::domain, "model: n must be >= 1");
  if (std::isnan(rho) || rho > 1.0 || rho < -1.0) {
    fail(ErrorCode::domain, "model: rho must lie in (-1/(n-1), 1]");
  }
  if (n > 1 && !(rho > -1.0 / (n - 1))) {
    fail(ErrorCode::domain, "model: rho = " + std::to_string(rho) +
                                " violates rho > -1/(n-1) = " + std::to_string(-1.0 / (n - 1)));
  }
  if (family == StatisticFamily::student_t && (!(nu > 0) || !std::isfinite(nu))) {
    fail(ErrorCode::domain, "model: nu must be positive");
  }
  if (mean.size() != 0 && mean.size() != n) {
    fail(ErrorCode::domain, "model: mean vector has " + std::to_string(mean.size()) +
                                " entries, expected " + std::to_string(n));
  }
  if (mean.size() != 0 && !mean.allFinite()) fail(ErrorCode::domain, "model: mean must be finite");
}

bool ExchangeableModel::is_null() const { return mean.size() == 0 || (mean.array() == 0.0).all(); }

void ExperimentConfig::validate() const {
  model.validate();
  check_replications(replications);
  if (alphas.empty()) fail(ErrorCode::config, "at least one alpha required");
  for (double a : alphas) check_alpha(a);
  if (workers < 1) fail(ErrorCode::config, "workers must be >= 1");
  for (const auto& m : methods) m.validate(model.n);
}

std::mt19937_64 block_engine(std::uint64_t seed, std::int64_t block) {
  const auto b = static_cast<std::uint64_t>(block);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

void sample_statistics(const ExchangeableModel& model, std::mt19937_64& rng, Eigen::VectorXd& out) {
  const int n = model.n;
  out.resize(n);
  std::normal_distribution<double> normal;
  for (int i = 0; i < n; ++i) out[i] = normal(rng);
  const double zbar = out.mean();
  const double within = std::sqrt(1.0 - model.rho);
  const double common = std::sqrt(1.0 + (n - 1) * model.rho) * zbar;
  out.array() = within * (out.array() - zbar) + common;
  if (model.family == StatisticFamily::student_t) {
    std::chi_squared_distribution<double> chi2(model.nu);
    out /= std::sqrt(chi2(rng) / model.nu);
  }
  if (model.mean.size() != 0) out += model.mean;
}

Eigen::VectorXd sample_statistics(const ExchangeableModel& model, std::uint64_t seed,
                                  std::int64_t replication) {
  model.validate();
  if (replication < 0) fail(ErrorCode::domain, "replication index must be >= 0");
  auto rng = block_engine(seed, replication / kBlockSize);
  Eigen::VectorXd t(model.n);
  for (std::int64_t r = 0; r <= replication % kBlockSize; ++r) sample_statistics(model, rng, t);
  return t;
}

void statistics_to_pvalues(const ExchangeableModel& model, const Eigen::VectorXd& t,
                           Eigen::VectorXd& p) {
  p.resize(t.size());
  const bool two = model.sided == Sidedness::two_sided;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    double v;
    if (model.family == StatisticFamily::normal) {
      v = two ? std::erfc(std::abs(t[i]) / std::numbers::sqrt2) : normal_sf(t[i]);
    } else {
      v = two ? 2.0 * student_t_survival(std::abs(t[i]), model.nu) : student_t_survival(t[i], model.nu);
    }
    p[i] = std::clamp(v, kMinP, 1.0);
  }
}

Eigen::VectorXd statistics_to_pvalues(const Eigen::VectorXd& t, const ExchangeableModel& model) {
  Eigen::VectorXd p;
  statistics_to_pvalues(model, t, p);
  return p;
}

ExperimentReport estimate_rejection_rate(const ExperimentConfig& config) {
  config.validate();
  const auto start = Clock::now();
  const std::size_t n_methods = config.methods.size();
  const std::size_t n_alpha = config.alphas.size();
  std::vector<DecisionRule> rules;
  for (const auto& m : config.methods) {
    for (double a : config.alphas) rules.emplace_back(m, config.model.n, a);
  }

  struct Tally {
    const std::vector<CombinationMethod>* methods;
    const std::vector<DecisionRule>* rules;
    std::size_t n_alpha;
    std::vector<std::int64_t> init() const { return std::vector<std::int64_t>(rules->size(), 0); }
    void visit(std::vector<std::int64_t>& counts, const Eigen::VectorXd&, const Eigen::VectorXd& p) const {
      Eigen::VectorXd x;
      for (std::size_t m = 0; m < methods->size(); ++m) {
        const auto& method = (*methods)[m];
        const bool heavy = method.kind == MethodKind::standard || method.kind == MethodKind::average ||
                           method.kind == MethodKind::weighted;
        if (heavy) x = transform(p, *method.distribution);
        for (std::size_t a = 0; a < n_alpha; ++a) {
          const auto& rule = (*rules)[m * n_alpha + a];
          if (heavy ? rule.rejects_transformed(p, x) : rule.rejects(p)) ++counts[m * n_alpha + a];
        }
      }
    }
  };

  const auto blocks = run_blocks<std::vector<std::int64_t>>(
      config.replications, config.seed, config.workers,
      for_each_replication(config.model, Tally{&config.methods, &rules, n_alpha}));

  std::vector<std::int64_t> totals(rules.size(), 0);
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < totals.size(); ++i) totals[i] += b[i];
  }

  ExperimentReport report;
  report.seed = config.seed;
  report.replications = config.replications;
  for (std::size_t m = 0; m < n_methods; ++m) {
    for (std::size_t a = 0; a < n_alpha; ++a) {
      ReportRow row;
      row.method = config.methods[m].label();
      row.alpha = config.alphas[a];
      row.rejections = totals[m * n_alpha + a];
      row.replications = config.replications;
      row.estimate = static_cast<double>(row.rejections) / static_cast<double>(row.replications);
      row.std_error = binomial_se(row.estimate, row.replications);
      report.rows.push_back(row);
    }
  }
  report.runtime_seconds = seconds_since(start);
  return report;
}

EquivalenceReport estimate_equivalence_ratio(const ExperimentConfig& config,
                                             const HeavyTailDistribution& d, const Eigen::VectorXd& w) {
  config.model.validate();
  check_replications(config.replications);
  if (config.alphas.empty()) fail(ErrorCode::config, "at least one alpha required");
  for (double a : config.alphas) check_alpha(a);
  const int n = config.model.n;
  const Eigen::VectorXd weights = w.size() == 0 ? Eigen::VectorXd::Ones(n) : w;
  const auto combination = CombinationMethod::weighted(d, weights);
  combination.validate(n);
  const auto bonf = CombinationMethod::bonferroni(mapped_bonferroni_weights(weights, d.tail_index()));

  std::vector<DecisionRule> comb_rules;
  std::vector<DecisionRule> bonf_rules;
  for (double a : config.alphas) {
    comb_rules.emplace_back(combination, n, a);
    bonf_rules.emplace_back(bonf, n, a);
  }
  const std::size_t n_alpha = config.alphas.size();

  // Per alpha: [combination, bonferroni, both].
  struct Tally {
    const HeavyTailDistribution* d;
    const std::vector<DecisionRule>* comb;
    const std::vector<DecisionRule>* bonf;
    std::vector<std::int64_t> init() const { return std::vector<std::int64_t>(3 * comb->size(), 0); }
    void visit(std::vector<std::int64_t>& c, const Eigen::VectorXd&, const Eigen::VectorXd& p) const {
      const Eigen::VectorXd x = transform(p, *d);
      for (std::size_t a = 0; a < comb->size(); ++a) {
        const bool wr = (*comb)[a].rejects_transformed(p, x);
        const bool br = (*bonf)[a].rejects(p);
        c[3 * a] += wr;
        c[3 * a + 1] += br;
        c[3 * a + 2] += wr && br;
      }
    }
  };

  const auto start = Clock::now();
  const auto blocks = run_blocks<std::vector<std::int64_t>>(
      config.replications, config.seed, config.workers,
      for_each_replication(config.model, Tally{&d, &comb_rules, &bonf_rules}));
  std::vector<std::int64_t> totals(3 * n_alpha, 0);
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < totals.size(); ++i) totals[i] += b[i];
  }

  EquivalenceReport report;
  report.seed = config.seed;
  report.replications = config.replications;
  const double r_total = static_cast<double>(config.replications);
  for (std::size_t a = 0; a < n_alpha; ++a) {
    EquivalenceRow row;
    row.alpha = config.alphas[a];
    row.combination_rejections = totals[3 * a];
    row.bonferroni_rejections = totals[3 * a + 1];
    const std::int64_t both = totals[3 * a + 2];
    row.disagreements = row.combination_rejections + row.bonferroni_rejections - 2 * both;
    row.replications = config.replications;
    const std::int64_t denom = std::min(row.combination_rejections, row.bonferroni_rejections);
    if (denom == 0) {
      throw InsufficientEventsError(
          "equivalence ratio at alpha = " + std::to_string(row.alpha) +
              ": no rejections (combination " + std::to_string(row.combination_rejections) +
              ", bonferroni " + std::to_string(row.bonferroni_rejections) + ", replications " +
              std::to_string(row.replications) + ")",
          row.combination_rejections, row.bonferroni_rejections, row.replications);
    }
    row.ratio = static_cast<double>(row.disagreements) / static_cast<double>(denom);
    // Delta method on D/M with paired indicators d (disagree) and m (denominator test rejects).
    const double mu_d = static_cast<double>(row.disagreements) / r_total;
    const double mu_m = static_cast<double>(denom) / r_total;
    const double mu_dm = static_cast<double>(denom - both) / r_total;
    const double cov = mu_dm - mu_d * mu_m;
    const double var = (mu_d * (1.0 - mu_d) - 2.0 * row.ratio * cov +
                        row.ratio * row.ratio * mu_m * (1.0 - mu_m)) /
                       (r_total * mu_m * mu_m);
    row.std_error = std::sqrt(std::max(0.0, var));
    report.rows.push_back(row);
  }
  report.runtime_seconds = seconds_since(start);
  return report;
}

MinpCalibration calibrate_minp(const ExchangeableModel& model, double alpha, std::int64_t replications,
                               std::uint64_t seed, int workers) {
  model.validate();
  check_replications(replications);
  check_alpha(alpha);
  if (!model.is_null()) fail(ErrorCode::config, "minP calibration requires a null model (mean 0)");

  struct Collect {
    std::vector<double> init() const { return {}; }
    void visit(std::vector<double>& out, const Eigen::VectorXd&, const Eigen::VectorXd& p) const {
      out.push_back(p.minCoeff());
    }
  };
  const auto blocks = run_blocks<std::vector<double>>(replications, seed, workers,
                                                      for_each_replication(model, Collect{}));
  std::vector<double> minima;
  minima.reserve(static_cast<std::size_t>(replications));
  for (const auto& b : blocks) minima.insert(minima.end(), b.begin(), b.end());

  // Smallest value whose empirical CDF reaches alpha.
  const auto rank = static_cast<std::int64_t>(std::ceil(alpha * static_cast<double>(replications))) - 1;
  const auto k = static_cast<std::size_t>(std::clamp<std::int64_t>(rank, 0, replications - 1));
  std::nth_element(minima.begin(), minima.begin() + static_cast<std::ptrdiff_t>(k), minima.end());

  MinpCalibration result;
  result.cutoff = minima[k];
  result.cutoff_ratio = result.cutoff / (alpha / model.n);
  result.replications = replications;
  result.unstable = static_cast<double>(replications) * alpha < 50.0;
  if (result.unstable) {
    result.warning = "R * alpha = " + std::to_string(static_cast<double>(replications) * alpha) +
                     " < 50; the cutoff quantile is unstable";
  }
  return result;
}

double tail_dependence_t(double nu, double rho) {
  if (!(nu > 0) || !std::isfinite(nu)) fail(ErrorCode::domain, "tail_dependence_t: nu must be > 0");
  if (std::isnan(rho) || !(rho > -1.0 && rho <= 1.0)) {
    fail(ErrorCode::domain, "tail_dependence_t: rho must lie in (-1, 1]");
  }
  const double arg = -std::sqrt((nu + 1.0) * (1.0 - rho) / (1.0 + rho));
  return 2.0 * student_t_cdf(arg, nu + 1.0);
}

CovarianceEstimate pvalue_covariance(const ExchangeableModel& model, std::int64_t replications,
                                     std::uint64_t seed, int workers) {
  model.validate();
  check_replications(replications);
  if (model.n != 2) fail(ErrorCode::shape, "pvalue_covariance requires n = 2");

  struct Collect {
    std::vector<double> init() const { return {}; }
    void visit(std::vector<double>& out, const Eigen::VectorXd&, const Eigen::VectorXd& p) const {
      out.push_back(p[0]);
      out.push_back(p[1]);
    }
  };
  const auto blocks = run_blocks<std::vector<double>>(replications, seed, workers,
                                                      for_each_replication(model, Collect{}));
  Eigen::MatrixX2d pairs(replications, 2);
  Eigen::Index row = 0;
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b.size(); i += 2, ++row) pairs.row(row) << b[i], b[i + 1];
  }
  const Eigen::RowVector2d mean = pairs.colwise().mean();
  const Eigen::VectorXd u =
      (pairs.col(0).array() - mean[0]) * (pairs.col(1).array() - mean[1]);
  const double r = static_cast<double>(replications);

  CovarianceEstimate result;
  result.replications = replications;
  result.covariance = u.sum() / r;
  if (replications > 1) {
    const double var = (u.array() - result.covariance).square().sum() / (r - 1.0);
    result.std_error = std::sqrt(var / r);
  }
  return result;
}

std::vector<JointExceedance> joint_exceedance(const ExchangeableModel& model,
                                              const std::vector<double>& levels,
                                              std::int64_t replications, std::uint64_t seed,
                                              int workers) {
  model.validate();
  check_replications(replications);
  if (model.n < 2) fail(ErrorCode::shape, "joint_exceedance requires n >= 2");
  if (!model.is_null()) fail(ErrorCode::config, "joint_exceedance requires a null model (mean 0)");
  std::vector<double> thresholds;
  for (double q : levels) {
    check_alpha(q);
    thresholds.push_back(model.family == StatisticFamily::student_t
                             ? HeavyTailDistribution::student_t(model.nu).upper_quantile(q)
                             : normal_upper_quantile(q));
  }

  struct Count {
    const std::vector<double>* thresholds;
    std::vector<std::int64_t> init() const { return std::vector<std::int64_t>(2 * thresholds->size(), 0); }
    void visit(std::vector<std::int64_t>& c, const Eigen::VectorXd& t, const Eigen::VectorXd&) const {
      for (std::size_t i = 0; i < thresholds->size(); ++i) {
        const bool second = t[1] > (*thresholds)[i];
        c[2 * i] += second;
        c[2 * i + 1] += second && t[0] > (*thresholds)[i];
      }
    }
  };
  const auto blocks = run_blocks<std::vector<std::int64_t>>(
      replications, seed, workers, for_each_replication(model, Count{&thresholds}));
  std::vector<JointExceedance> result(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    auto& e = result[i];
    e.marginal_level = levels[i];
    e.threshold = thresholds[i];
    for (const auto& b : blocks) {
      e.marginal_exceedances += b[2 * i];
      e.joint_exceedances += b[2 * i + 1];
    }
    e.conditional = e.marginal_exceedances == 0
                        ? 0.0
                        : static_cast<double>(e.joint_exceedances) /
                              static_cast<double>(e.marginal_exceedances);
  }
  return result;
}

int default_worker_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace heavycomb
