#pragma once

// Seeded Monte Carlo engine for exchangeable normal / multivariate t test
// statistics. Replications are grouped in fixed blocks of kBlockSize; block b
// draws from its own std::mt19937_64 seeded by (seed, b), so every estimate
// is bit-identical for any worker count.

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "heavycomb/combine.hpp"
#include "heavycomb/distributions.hpp"

namespace heavycomb {

enum class StatisticFamily { normal, student_t };
enum class Sidedness { one_sided, two_sided };

struct ExchangeableModel {
  StatisticFamily family = StatisticFamily::normal;
  int n = 1;
  double rho = 0.0;
  double nu = 1.0;        // student_t only
  Eigen::VectorXd mean;   // empty means the zero vector
  Sidedness sided = Sidedness::one_sided;

  /// Throws domain when rho is outside (-1/(n-1), 1] or the fields disagree.
  void validate() const;
  bool is_null() const;
};

struct ExperimentConfig {
  ExchangeableModel model;
  std::vector<CombinationMethod> methods;
  std::vector<double> alphas;
  std::int64_t replications = 0;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
};

struct ReportRow {
  std::string method;
  double alpha = 0.0;
  std::int64_t rejections = 0;
  std::int64_t replications = 0;
  double estimate = 0.0;
  double std_error = 0.0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::uint64_t seed = 0;
  std::int64_t replications = 0;
  double runtime_seconds = 0.0;
};

struct EquivalenceRow {
  double alpha = 0.0;
  std::int64_t combination_rejections = 0;
  std::int64_t bonferroni_rejections = 0;
  std::int64_t disagreements = 0;
  std::int64_t replications = 0;
  double ratio = 0.0;
  double std_error = 0.0;
};

struct EquivalenceReport {
  std::vector<EquivalenceRow> rows;
  std::uint64_t seed = 0;
  std::int64_t replications = 0;
  double runtime_seconds = 0.0;
};

struct MinpCalibration {
  double cutoff = 0.0;
  double cutoff_ratio = 0.0;
  std::int64_t replications = 0;
  bool unstable = false;   // R * alpha < 50
  std::string warning;
};

struct CovarianceEstimate {
  double covariance = 0.0;
  double std_error = 0.0;
  std::int64_t replications = 0;
};

struct JointExceedance {
  double marginal_level = 0.0;   // q with threshold Q_t(1 - q)
  double threshold = 0.0;
  std::int64_t marginal_exceedances = 0;
  std::int64_t joint_exceedances = 0;
  double conditional = 0.0;      // joint / marginal
};

inline constexpr std::int64_t kBlockSize = 1024;

/// Engine for block `block` of a run seeded with `seed`.
std::mt19937_64 block_engine(std::uint64_t seed, std::int64_t block);

/// Draws one vector of statistics, advancing `rng`.
void sample_statistics(const ExchangeableModel& model, std::mt19937_64& rng, Eigen::VectorXd& out);
/// The statistics of replication `replication` of a run seeded with `seed`.
Eigen::VectorXd sample_statistics(const ExchangeableModel& model, std::uint64_t seed,
                                  std::int64_t replication);

void statistics_to_pvalues(const ExchangeableModel& model, const Eigen::VectorXd& t,
                           Eigen::VectorXd& p);
Eigen::VectorXd statistics_to_pvalues(const Eigen::VectorXd& t, const ExchangeableModel& model);

ExperimentReport estimate_rejection_rate(const ExperimentConfig& config);

/// Shared-sample estimate of Pr(phi_wgt != phi_bon) / min{Pr(phi_wgt = 1), Pr(phi_bon = 1)}
/// per alpha, Bonferroni weights mapped as w^gamma / kappa. Throws
/// InsufficientEventsError when a denominator is zero. config.methods is ignored.
EquivalenceReport estimate_equivalence_ratio(const ExperimentConfig& config,
                                             const HeavyTailDistribution& d, const Eigen::VectorXd& w);

MinpCalibration calibrate_minp(const ExchangeableModel& model, double alpha, std::int64_t replications,
                               std::uint64_t seed, int workers = 1);

/// 2 F_{t, nu+1}(-sqrt((nu + 1)(1 - rho)/(1 + rho))).
double tail_dependence_t(double nu, double rho);

/// Empirical covariance of the two p-values of an n = 2 model.
CovarianceEstimate pvalue_covariance(const ExchangeableModel& model, std::int64_t replications,
                                     std::uint64_t seed, int workers = 1);

/// Pr(T_1 > c, T_2 > c) / Pr(T_2 > c) at c = Q_t(1 - q) for each q, from the
/// first two coordinates of a student_t model.
std::vector<JointExceedance> joint_exceedance(const ExchangeableModel& model,
                                              const std::vector<double>& levels,
                                              std::int64_t replications, std::uint64_t seed,
                                              int workers = 1);

int default_worker_count();

/// Runs fn(rng, begin, end) over every block and returns the per-block
/// results in block order.
template <typename Result, typename Fn>
std::vector<Result> run_blocks(std::int64_t replications, std::uint64_t seed, int workers, Fn fn) {
  const std::int64_t blocks = (replications + kBlockSize - 1) / kBlockSize;
  std::vector<Result> results(static_cast<std::size_t>(blocks));
  std::atomic<std::int64_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto work = [&] {
    try {
      for (std::int64_t b = next++; b < blocks; b = next++) {
        auto rng = block_engine(seed, b);
        const std::int64_t begin = b * kBlockSize;
        const std::int64_t end = std::min(replications, begin + kBlockSize);
        results[static_cast<std::size_t>(b)] = fn(rng, begin, end);
      }
    } catch (...) {
      next = blocks;
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  const int count = static_cast<int>(std::clamp<std::int64_t>(workers, 1, std::max<std::int64_t>(blocks, 1)));
  if (count == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < count; ++i) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace heavycomb
