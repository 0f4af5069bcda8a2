#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "heavycomb/combine.hpp"
#include "heavycomb/errors.hpp"

using namespace heavycomb;
using HT = HeavyTailDistribution;
using Vec = Eigen::VectorXd;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

bool throws_code(auto fn, ErrorCode code) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

}  // namespace

TEST_CASE("transform") {
  const auto x = transform(vec({0.5, 0.25}), HT::cauchy());
  CHECK(x[0] == 0.0);
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(transform(vec({0.1}), HT::pareto(1.0))[0] == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(throws_code([] { transform(vec({0.0}), HT::cauchy()); }, ErrorCode::domain));
  CHECK(throws_code([] { transform(vec({1.2}), HT::cauchy()); }, ErrorCode::domain));
  int saturated = 0;
  const auto y = transform(vec({1.0, 0.3}), HT::cauchy(), &saturated);
  CHECK(saturated == 1);
  CHECK(y[0] == kSaturatedQuantile);
  CHECK(transform(vec({1.0}), HT::pareto(2.0))[0] == 1.0);
  // Strictly decreasing in p.
  double prev = std::numeric_limits<double>::infinity();
  for (double p = 1e-12; p < 1.0; p *= 1.7) {
    const double v = transform(vec({p}), HT::levy())[0];
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("combine_standard examples") {
  const auto r = combine_standard(vec({0.5, 0.5}), HT::cauchy());
  CHECK(r.statistic == 0.0);
  CHECK(r.combined_p == 1.0);
  for (const auto& d : {HT::cauchy(), HT::pareto(1.3), HT::levy(), HT::student_t(2.5)}) {
    CHECK(combine_standard(vec({0.05}), d).combined_p == doctest::Approx(0.05).epsilon(1e-12));
  }
  const auto s = combine_standard(vec({0.01, 0.5}), HT::cauchy());
  CHECK(s.statistic == doctest::Approx(1.0 / std::tan(0.01 * std::numbers::pi)).epsilon(1e-14));
  CHECK(s.statistic == doctest::Approx(31.820515953773958).epsilon(1e-12));
  CHECK(s.combined_p == doctest::Approx(0.02).epsilon(1e-13));
  CHECK(s.kappa == 2.0);
}

TEST_CASE("combine_average examples") {
  CHECK(combine_average(vec({0.5, 0.5}), HT::cauchy()).combined_p == doctest::Approx(0.5).epsilon(1e-15));
  for (int n : {1, 3, 10, 100}) {
    CHECK(combine_average(Vec::Constant(n, 0.0123), HT::cauchy()).combined_p ==
          doctest::Approx(0.0123).epsilon(1e-12));
  }
  const auto r = combine_average(vec({0.02, 0.98}), HT::pareto(1.0));
  CHECK(r.statistic == doctest::Approx(25.510204081632653061).epsilon(1e-13));
  CHECK(r.combined_p == doctest::Approx(0.0392).epsilon(1e-13));
  CHECK(throws_code([] { combine_average(vec({0.1, 0.2}), HT::levy()); }, ErrorCode::method_misuse));
}

TEST_CASE("combine_weighted examples") {
  const auto p = vec({0.5, 0.5});
  const auto w1 = combine_weighted(p, vec({1, 1}), HT::cauchy());
  const auto st = combine_standard(p, HT::cauchy());
  CHECK(w1.statistic == st.statistic);
  CHECK(w1.combined_p == st.combined_p);
  CHECK(combine_weighted(p, vec({0.5, 0.5}), HT::cauchy()).combined_p == doctest::Approx(0.5).epsilon(1e-15));
  const auto r = combine_weighted(vec({0.1, 0.5}), vec({2, 1}), HT::pareto(1.0));
  CHECK(r.statistic == doctest::Approx(22.0).epsilon(1e-14));
  CHECK(r.kappa == 3.0);
  CHECK(r.combined_p == doctest::Approx(3.0 / 22.0).epsilon(1e-14));
  CHECK(throws_code([] { combine_weighted(vec({0.1, 0.5}), vec({1}), HT::cauchy()); }, ErrorCode::shape));
  CHECK(throws_code([] { combine_weighted(vec({0.1}), vec({-1}), HT::cauchy()); }, ErrorCode::domain));
}

TEST_CASE("exact coincidences on random vectors") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1e-9, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + trial % 12;
    Vec p(n);
    for (auto& v : p) v = u(rng);
    for (const auto& d : {HT::cauchy(), HT::pareto(1.0), HT::levy(), HT::frechet(2.0), HT::truncated_t(1, 0.9)}) {
      const auto a = combine_weighted(p, Vec::Ones(n), d);
      const auto b = combine_standard(p, d);
      CHECK(a.statistic == b.statistic);
      CHECK(a.combined_p == b.combined_p);
      if (d.tail_index() == 1.0) {
        const auto c = combine_weighted(p, Vec::Constant(n, 1.0 / n), d);
        const auto e = combine_average(p, d);
        CHECK(c.combined_p == doctest::Approx(e.combined_p).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("bonferroni examples") {
  CHECK(bonferroni(vec({0.01, 0.04, 0.9})).combined_p == doctest::Approx(0.03).epsilon(1e-15));
  CHECK(bonferroni(vec({0.01, 0.04, 0.9}), Vec::Constant(3, 1.0 / 3)).combined_p == doctest::Approx(0.03).epsilon(1e-14));
  CHECK(bonferroni(vec({0.09, 0.02}), vec({0.9, 0.1})).combined_p == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(bonferroni(vec({0.5, 0.5})).combined_p == 1.0);
  const auto r = bonferroni(vec({0.09, 0.02}), vec({9, 1}));
  CHECK(r.weights_normalized);
  CHECK(r.combined_p == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(!bonferroni(vec({0.09, 0.02}), vec({0.9, 0.1})).weights_normalized);
  CHECK(throws_code([] { bonferroni(vec({0.1, 0.2}), vec({1})); }, ErrorCode::shape));
}

TEST_CASE("bonferroni_as_max_statistic examples") {
  CHECK(bonferroni_as_max_statistic(vec({0.01, 0.5}), vec({1, 1}), HT::cauchy(), 0.05));
  CHECK(!bonferroni_as_max_statistic(vec({0.03, 0.5}), vec({1, 1}), HT::cauchy(), 0.05));
}

TEST_CASE("bonferroni rewrite agrees with mapped-weight Bonferroni") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> uw(0.05, 5.0);
  int checked = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    const int n = 1 + trial % 8;
    const double gamma = std::array{0.5, 1.0, 1.5}[trial % 3];
    const double alpha = std::pow(10.0, -4.0 * u(rng)) * 0.5;
    Vec p(n);
    Vec w(n);
    for (int i = 0; i < n; ++i) {
      p[i] = std::max(1e-300, std::pow(u(rng), 3.0));
      w[i] = uw(rng);
    }
    const auto d = HT::pareto(gamma);
    const bool rewrite = bonferroni_as_max_statistic(p, w, d, alpha);
    const bool direct = bonferroni(p, mapped_bonferroni_weights(w, gamma)).statistic < alpha;
    CHECK(rewrite == direct);
    // Equal weights: exact for every family.
    const auto c = HT::cauchy();
    CHECK(bonferroni_as_max_statistic(p, Vec::Ones(n), c, alpha) == (bonferroni(p).statistic < alpha));
    ++checked;
  }
  CHECK(checked == 20000);
}

TEST_CASE("fisher") {
  CHECK(fisher(vec({0.2})).combined_p == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(fisher(vec({1, 1})).combined_p == 1.0);
  CHECK(fisher(vec({1, 1})).statistic == 0.0);
  const auto r = fisher(vec({0.05, 0.05}));
  CHECK(r.statistic == doctest::Approx(11.98292909421596397).epsilon(1e-14));
  CHECK(r.combined_p == doctest::Approx(0.01747866136776995497).epsilon(1e-13));
}

TEST_CASE("bh_adjust") {
  const auto a = bh_adjust(vec({0.01, 0.02, 0.03, 0.04}));
  for (int i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(0.04).epsilon(1e-15));
  CHECK(bh_adjust(vec({0.37}))[0] == 0.37);
  const auto b = bh_adjust(vec({0.001, 1.0}));
  CHECK(b[0] == doctest::Approx(0.002).epsilon(1e-15));
  CHECK(b[1] == 1.0);
  // Original order preserved; brute force min over j >= i.
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 1 + trial % 15;
    Vec p(m);
    for (auto& v : p) v = u(rng);
    const auto adj = bh_adjust(p);
    for (int i = 0; i < m; ++i) {
      int rank = 1;
      for (int j = 0; j < m; ++j) rank += p[j] < p[i] || (p[j] == p[i] && j < i);
      double expect = 1.0;
      for (int j = 0; j < m; ++j) {
        int rj = 1;
        for (int k = 0; k < m; ++k) rj += p[k] < p[j] || (p[k] == p[j] && k < j);
        if (rj >= rank) expect = std::min(expect, m * p[j] / rj);
      }
      CHECK(adj[i] == doctest::Approx(expect).epsilon(1e-14));
    }
  }
}

TEST_CASE("combined p-values are monotone in each p_i and lie in (0, 1]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(1e-8, 1.0);
  const std::vector<CombinationMethod> methods = {
      CombinationMethod::standard(HT::cauchy()),      CombinationMethod::standard(HT::levy()),
      CombinationMethod::standard(HT::pareto(1.5)),   CombinationMethod::standard(HT::truncated_t(1, 0.9)),
      CombinationMethod::average(HT::cauchy()),       CombinationMethod::fisher(),
      CombinationMethod::bonferroni(),
  };
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 6;
    Vec p(n);
    for (auto& v : p) v = u(rng);
    for (const auto& m : methods) {
      const double base = m.apply(p).combined_p;
      CHECK(base > 0.0);
      CHECK(base <= 1.0);
      for (int i = 0; i < n; ++i) {
        Vec q = p;
        q[i] *= 0.5;
        CHECK(m.apply(q).combined_p <= base);
      }
    }
    const Vec w = Vec::LinSpaced(n, 0.5, 2.0);
    const double base = combine_weighted(p, w, HT::cauchy()).combined_p;
    Vec q = p;
    q[0] *= 0.3;
    CHECK(combine_weighted(q, w, HT::cauchy()).combined_p <= base);
  }
}

TEST_CASE("perfect correlation limit") {
  const double alpha = 1e-6;
  CHECK(perfect_correlation_rejection_probability(HT::cauchy(), 5, alpha) / alpha ==
        doctest::Approx(1.0).epsilon(0.02));
  CHECK(perfect_correlation_rejection_probability(HT::levy(), 5, alpha) / alpha ==
        doctest::Approx(0.4472135954999392).epsilon(0.02));
  CHECK(perfect_correlation_rejection_probability(HT::pareto(1.0), 5, alpha) / alpha ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(perfect_correlation_rejection_probability(HT::pareto(2.0), 5, alpha) / alpha ==
        doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("threshold when alpha/kappa >= 1") {
  CHECK(combination_threshold(HT::pareto(1.0), 0.5, 0.25) == 1.0);
  CHECK(combination_threshold(HT::cauchy(), 0.5, 0.25) == -std::numeric_limits<double>::infinity());
  const DecisionRule rule(CombinationMethod::weighted(HT::cauchy(), vec({0.1, 0.1})), 2, 0.5);
  CHECK(rule.rejects(vec({0.9, 0.9})));
}

TEST_CASE("DecisionRule matches the threshold definitions") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  const auto d = HT::cauchy();
  const DecisionRule std_rule(CombinationMethod::standard(d), 4, 0.05);
  const DecisionRule avg_rule(CombinationMethod::average(d), 4, 0.05);
  const DecisionRule bon_rule(CombinationMethod::bonferroni(), 4, 0.05);
  const DecisionRule fis_rule(CombinationMethod::fisher(), 4, 0.05);
  const DecisionRule minp_rule(CombinationMethod::minp(0.02), 4, 0.05);
  for (int trial = 0; trial < 500; ++trial) {
    Vec p(4);
    for (auto& v : p) v = std::pow(u(rng), 2.0);
    const Vec x = transform(p, d);
    CHECK(std_rule.rejects(p) == (x.sum() > d.upper_quantile(0.05 / 4)));
    CHECK(avg_rule.rejects(p) == (x.sum() / 4 > d.upper_quantile(0.05)));
    CHECK(bon_rule.rejects(p) == (4 * p.minCoeff() < 0.05));
    CHECK(fis_rule.rejects(p) == (fisher(p).combined_p < 0.05));
    CHECK(minp_rule.rejects(p) == (p.minCoeff() <= 0.02));
  }
}

TEST_CASE("method labels and validation") {
  CHECK(CombinationMethod::standard(HT::cauchy()).label() == "standard:cauchy");
  CHECK(CombinationMethod::bonferroni().label() == "bonferroni");
  CHECK(CombinationMethod::weighted(HT::pareto(1), vec({1, 2})).label() == "weighted:pareto:1");
  CHECK(throws_code([] { CombinationMethod::weighted(HT::cauchy(), vec({1, 2})).validate(3); }, ErrorCode::shape));
  CHECK(throws_code([] { CombinationMethod::minp(0.0).validate(3); }, ErrorCode::config));
}
