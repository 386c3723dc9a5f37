#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "tailfactor/error.hpp"
#include "tailfactor/evt.hpp"

using namespace tailfactor;

TEST(OrderStatistic, Examples) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_EQ(order_statistic_quantile(v, 10), 91.0);
  EXPECT_EQ(order_statistic_quantile(v, 1), 100.0);
  EXPECT_EQ(order_statistic_quantile({5, 5, 5, 1}, 3), 5.0);
  EXPECT_EQ(order_statistic_quantile({5, 5, 5, 1}, 4), 1.0);
  EXPECT_THROW(order_statistic_quantile(v, 0), ArgumentError);
  EXPECT_THROW(order_statistic_quantile(v, 101), ArgumentError);
}

TEST(Hill, ClosedFormExample) {
  const int n = 16;
  std::vector<double> v;
  for (int j = 1; j <= n; ++j) v.push_back(std::sqrt(static_cast<double>(n) / j));
  // (0.5 / k) * sum_{i=1..k} log(k / i) at k = 4, summed directly.
  double oracle = 0.0;
  for (int i = 1; i <= 4; ++i) oracle += std::log(4.0 / i);
  oracle *= 0.5 / 4.0;
  EXPECT_NEAR(hill(v, 4), oracle, 1e-14);
  EXPECT_NEAR(hill(v, 4), 0.295890, 1e-6);
}

TEST(Hill, EqualTopValuesGiveZero) {
  EXPECT_DOUBLE_EQ(hill({3, 3, 3, 3, 1, 0.5}, 3), 0.0);
}

TEST(Hill, NonpositiveTopValueIsDomainError) {
  try {
    hill({4, 2, 0, -1, -3}, 3);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("y_(3)"), std::string::npos);
  }
  EXPECT_THROW(hill({1, 2, 3}, 1), ArgumentError);
  EXPECT_THROW(hill({1, 2, 3}, 3), ArgumentError);
}

TEST(Hill, ScaleInvariantAndOrderStatisticEquivariant) {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(200), w(200);
    const double a = 0.01 + 10.0 * u(gen);
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = std::pow(u(gen), -0.5);
      w[j] = a * v[j];
    }
    EXPECT_NEAR(hill(w, 20), hill(v, 20), 1e-12);
    EXPECT_NEAR(order_statistic_quantile(w, 20), a * order_statistic_quantile(v, 20), 1e-12 * a);
  }
}

TEST(Weissman, Examples) {
  // k / (n p) = 100.
  EXPECT_NEAR(weissman_extrapolate(10.0, 0.5, 100, 10000, 1e-4), 100.0, 1e-10);
  EXPECT_DOUBLE_EQ(weissman_extrapolate(7.5, 0.0, 100, 10000, 1e-3), 7.5);
  EXPECT_THROW(weissman_extrapolate(10.0, 0.5, 100, 10000, 0.01), ArgumentError);
  EXPECT_THROW(weissman_extrapolate(10.0, 0.5, 100, 10000, 0.0), ArgumentError);
}

TEST(Weissman, RecoversReferenceQuantile) {
  // U(x) = c (x/2)^(1/lambda): extrapolating U(n/k) with gamma = 1/lambda
  // lands on U(1/p).
  const double c = 1.7, lambda = 3.0;
  const std::size_t n = 40000, k = 4000;
  const double p = 2.5e-4;
  const double u = c * std::pow(static_cast<double>(n) / k / 2.0, 1.0 / lambda);
  EXPECT_NEAR(weissman_extrapolate(u, 1.0 / lambda, k, n, p), c * std::pow(1.0 / (2.0 * p), 1.0 / lambda), 1e-12);
}

TEST(Weissman, NonincreasingInP) {
  double prev = 1e300;
  for (double p = 1e-6; p < 0.01; p *= 1.3) {
    const double q = weissman_extrapolate(2.0, 0.4, 100, 10000, p);
    EXPECT_LE(q, prev);
    prev = q;
  }
}

TEST(EstimateTail, CombinesBoth) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  const auto est = estimate_tail(v, 10);
  EXPECT_EQ(est.u_intermediate, 91.0);
  ASSERT_TRUE(est.gamma_hat);
  EXPECT_NEAR(*est.gamma_hat, hill(v, 10), 1e-15);
  EXPECT_EQ(est.k, 10u);
  EXPECT_EQ(est.n, 100u);
  const auto lenient = estimate_tail({3, -1, -2, -4}, 2, false);
  EXPECT_FALSE(lenient.gamma_hat);
  EXPECT_THROW(estimate_tail({3, -1, -2, -4}, 2, true), DomainError);
}

TEST(HillPlot, MatchesPointwiseHill) {
  std::vector<double> v;
  for (int j = 1; j <= 50; ++j) v.push_back(1.0 / j);
  const auto plot = hill_plot(v, 2, 30);
  ASSERT_EQ(plot.size(), 29u);
  for (const auto& pt : plot) EXPECT_NEAR(pt.gamma_hat, hill(v, pt.k), 1e-12);
}

// Small version of the asymptotic-normality check; the full one lives in
// the acceptance suite.
TEST(Hill, ParetoSamplesCentreOnGamma) {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double gamma = 0.5;
  double sum = 0.0;
  const int reps = 100;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> v(5000);
    for (auto& x : v) x = std::pow(1.0 - u(gen), -gamma);
    sum += std::sqrt(500.0) * (hill(v, 500) / gamma - 1.0);
  }
  EXPECT_LT(std::abs(sum / reps), 0.35);
}
