#include "heavycomb/closed_testing.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <vector>

#include "heavycomb/errors.hpp"

namespace heavycomb {

namespace {

std::vector<Eigen::Index> ascending_order(PValues p) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(p.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  return order;
}

void check_alpha(double alpha) {
  if (!(alpha > 0 && alpha < 1)) fail(ErrorCode::domain, "alpha must lie in (0, 1)");
}

}  // namespace

ClosedTestingResult closed_test_shortcut(PValues p, const HeavyTailDistribution& d, double alpha) {
  check_alpha(alpha);
  const Eigen::VectorXd x_orig = transform(p, d);
  const int n = static_cast<int>(p.size());
  const auto order = ascending_order(p);

  // 1-based arrays below follow the ranks of the sorted p-values.
  std::vector<double> ps(n + 1), x(n + 1), tail(n + 2, 0.0);
  for (int r = 1; r <= n; ++r) {
    ps[r] = p[order[r - 1]];
    x[r] = x_orig[order[r - 1]];
  }
  // tail[k] = sum_{j=n-k+2}^{n} x_j, the k-1 largest p-values.
  for (int k = 2; k <= n; ++k) tail[k] = tail[k - 1] + x[n - k + 2];

  std::vector<double> running_max(n + 1);
  for (int k = 1; k <= n; ++k) {
    const double c = combination_threshold(d, alpha, k) - tail[k];
    running_max[k] = k == 1 ? c : std::max(running_max[k - 1], c);
  }
  int cut = n + 1;
  for (int i = 1; i <= n; ++i) {
    if (x[i] < running_max[n - i + 1]) {
      cut = i;
      break;
    }
  }

  ClosedTestingResult result;
  result.adjusted_p.resize(n);
  result.rejected.resize(n);
  result.rejection_cut = cut;
  for (int i = 1; i <= n; ++i) {
    double adj = ps[i];
    for (int k = 2; k <= n; ++k) {
      const double s = std::max(x[i], x[n - k + 1]) + tail[k];
      adj = std::max(adj, k * d.survival(s));
    }
    result.adjusted_p[order[i - 1]] = std::min(1.0, adj);
    result.rejected[order[i - 1]] = i < cut;
  }
  return result;
}

ClosedTestingResult closed_test_bruteforce(PValues p, const HeavyTailDistribution& d, double alpha) {
  check_alpha(alpha);
  const int n = static_cast<int>(p.size());
  if (n > kBruteForceMaxN) {
    fail(ErrorCode::capacity, "brute-force closed testing supports n <= " +
                                  std::to_string(kBruteForceMaxN) + ", got " + std::to_string(n));
  }
  const Eigen::VectorXd x = transform(p, d);
  const std::uint32_t full = (std::uint32_t{1} << n) - 1;
  std::vector<double> sums(std::size_t{full} + 1, 0.0);
  Eigen::VectorXd adjusted = Eigen::VectorXd::Zero(n);
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    sums[mask] = sums[mask & (mask - 1)] + x[std::countr_zero(mask)];
    const int size = std::popcount(mask);
    const double pi = std::min(1.0, size * d.survival(sums[mask]));
    for (std::uint32_t rest = mask; rest != 0; rest &= rest - 1) {
      const int i = std::countr_zero(rest);
      adjusted[i] = std::max(adjusted[i], pi);
    }
  }

  ClosedTestingResult result;
  result.adjusted_p = adjusted;
  result.rejected = adjusted.array() <= alpha;
  const auto order = ascending_order(p);
  result.rejection_cut = n + 1;
  for (int r = 0; r < n; ++r) {
    if (!result.rejected[order[r]]) {
      result.rejection_cut = r + 1;
      break;
    }
  }
  return result;
}

}  // namespace heavycomb
