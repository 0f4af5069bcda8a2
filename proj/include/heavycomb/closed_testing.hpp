#pragma once

// Closed testing of the standard combination test: individual-hypothesis
// decisions with familywise error control.

#include <Eigen/Core>

#include "heavycomb/combine.hpp"
#include "heavycomb/distributions.hpp"

namespace heavycomb {

struct ClosedTestingResult {
  Eigen::VectorXd adjusted_p;        // original order
  Eigen::Array<bool, Eigen::Dynamic, 1> rejected;
  int rejection_cut = 1;             // 1-based J; the J-1 smallest p-values are rejected
};

/// Step-down shortcut, O(n log n) decisions and O(n^2) adjusted p-values.
ClosedTestingResult closed_test_shortcut(PValues p, const HeavyTailDistribution& d, double alpha);

/// Enumerates all 2^n - 1 subsets. Throws capacity for n > kBruteForceMaxN.
ClosedTestingResult closed_test_bruteforce(PValues p, const HeavyTailDistribution& d, double alpha);

inline constexpr int kBruteForceMaxN = 20;

}  // namespace heavycomb
