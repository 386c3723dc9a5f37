#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "tailfactor/check_loss.hpp"
#include "tailfactor/error.hpp"

using namespace tailfactor;

TEST(CheckLoss, Examples) {
  EXPECT_DOUBLE_EQ(check_loss(0.0, 0.1), 0.0);
  EXPECT_DOUBLE_EQ(check_loss(2.0, 0.1), 1.8);
  EXPECT_DOUBLE_EQ(check_loss(-2.0, 0.1), 0.2);
}

TEST(CheckLoss, RejectsLevelOutsideUnitInterval) {
  EXPECT_THROW(check_loss(1.0, 0.0), ArgumentError);
  EXPECT_THROW(check_loss(1.0, 1.0), ArgumentError);
  EXPECT_THROW(check_loss(1.0, -0.3), ArgumentError);
}

TEST(CheckLoss, NonnegativeAndComplementIdentity) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> x(-50.0, 50.0);
  std::uniform_real_distribution<double> tau(0.001, 0.999);
  for (int i = 0; i < 2000; ++i) {
    const double v = x(gen);
    const double t = tau(gen);
    EXPECT_GT(check_loss(v, t), 0.0);
    EXPECT_NEAR(check_loss(v, t) + check_loss(v, 1.0 - t), std::abs(v), 1e-12);
    EXPECT_NEAR(check_loss(v, t), check_loss(-v, 1.0 - t), 1e-12);
  }
}

// Any minimiser over the sample points is an empirical (1 - tau)-quantile:
// at most n*tau points lie strictly above it and at most n*(1 - tau) below.
TEST(CheckLoss, MinimiserIsUpperTailQuantile) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 20;
    const double tau = 0.05 + 0.9 * (trial % 17) / 16.0;
    std::vector<double> s(n);
    for (auto& v : s) v = z(gen);
    double best = 0.0;
    double best_loss = 1e300;
    for (double q : s) {
      double loss = 0.0;
      for (double v : s) loss += check_loss(v - q, tau);
      if (loss < best_loss - 1e-12) {
        best_loss = loss;
        best = q;
      }
    }
    const auto above = std::count_if(s.begin(), s.end(), [&](double v) { return v > best; });
    const auto below = std::count_if(s.begin(), s.end(), [&](double v) { return v < best; });
    EXPECT_LE(above, n * tau + 1e-9);
    EXPECT_LE(below, n * (1.0 - tau) + 1e-9);
  }
}

TEST(CheckLoss, SumMatchesCellwise) {
  Matrix y(2, 2), f(2, 2);
  y << 1, 2, 3, 4;
  f << 0, 3, 3, 1;
  EXPECT_DOUBLE_EQ(check_loss_sum(y, f, 0.25), 0.75 + 0.25 + 0.0 + 2.25);
  EXPECT_THROW(check_loss_sum(y, Matrix(3, 2), 0.25), ArgumentError);
}
