#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tailfactor/dgp.hpp"
#include "tailfactor/error.hpp"
#include "tailfactor/selection.hpp"
#include "support/oracles.hpp"

using namespace tailfactor;

namespace {

Matrix iid_panel(Eigen::Index N, Eigen::Index T, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix y(N, T);
  for (Eigen::Index j = 0; j < y.size(); ++j) y.data()[j] = std::pow(u(gen), -0.5);
  return y;
}

}  // namespace

TEST(KsStatistic, AllExceedancesFirst) {
  // Column-major 2 x 4; time-major order visits column by column.
  Matrix y(2, 4);
  y << 9, 1, 2, 3, 8, 4, 5, 6;
  // pooled: 9 8 1 4 2 5 3 6, k = 2 -> exceedances at positions 1, 2.
  const double sup = 1.0 - 2.0 / 8.0;
  EXPECT_NEAR(ks_statistic(y, 2), std::sqrt(2.0) * sup, 1e-14);
}

TEST(KsStatistic, MatchesDenseGridOnSmallPanels) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix y = iid_panel(4, 4, gen());
    for (std::size_t k : {1u, 3u, 8u, 15u}) {
      EXPECT_NEAR(ks_statistic(y, k), oracle::ks_grid(y, k), std::sqrt(double(k)) * 1e-3 / 16.0 + 1e-12);
    }
  }
}

TEST(KsStatistic, InvariantUnderMonotoneTransforms) {
  const Matrix y = iid_panel(10, 12, 8);
  const Matrix g = y.array().log() * 3.0 + 7.0;
  EXPECT_DOUBLE_EQ(ks_statistic(y, 20), ks_statistic(g, 20));
}

TEST(KsStatistic, RejectsBadK) {
  const Matrix y = iid_panel(3, 3, 1);
  EXPECT_THROW(ks_statistic(y, 0), ArgumentError);
  EXPECT_THROW(ks_statistic(y, 9), ArgumentError);
}

TEST(KsPvalue, KnownValues) {
  EXPECT_EQ(ks_pvalue(0.0), 1.0);
  EXPECT_NEAR(ks_pvalue(1.358), 0.05, 5e-4);
  EXPECT_NEAR(ks_pvalue(1.224), 0.10, 5e-4);
  EXPECT_NEAR(ks_pvalue(1.628), 0.01, 2e-4);
  EXPECT_LT(ks_pvalue(3.0), 1e-6);
  EXPECT_THROW(ks_pvalue(-1.0), ArgumentError);
}

TEST(KsPvalue, BranchesAgreeAndDecrease) {
  double prev = 1.0;
  for (double x = 0.05; x < 4.0; x += 0.01) {
    const double p = ks_pvalue(x);
    EXPECT_LE(p, prev + 1e-12);
    prev = p;
  }
  EXPECT_NEAR(ks_pvalue(1.0 - 1e-12), ks_pvalue(1.0), 1e-9);
}

TEST(KsTest, ReportsLevels) {
  const auto rep = ks_test(iid_panel(20, 20, 4), 40);
  EXPECT_EQ(rep.reject_at.size(), 3u);
  EXPECT_EQ(rep.reject_at.at(0.05), rep.p_value < 0.05);
  EXPECT_FALSE(rep.note.empty());
}

TEST(RequireAlpha, OnlyStandardLevels) {
  EXPECT_NO_THROW(require_alpha(0.05));
  EXPECT_NO_THROW(require_alpha(0.01));
  EXPECT_THROW(require_alpha(0.2), ArgumentError);
}

TEST(IcSelect, LossTermNonincreasingAndArgmin) {
  const DgpSample s = generate(DgpSpec{1, 30, 30, 2.0, 11});
  TailConfig cfg;
  cfg.k = 90;
  FitOptions opts;
  opts.n_restarts = 1;
  const auto ic = ic_select(s.panel, cfg, opts);
  ASSERT_EQ(ic.criterion_values.size(), 4u);
  ASSERT_EQ(ic.fits.size(), 3u);
  for (std::size_t l = 1; l < ic.criterion_values.size(); ++l) {
    EXPECT_LE(ic.criterion_values[l].loss_term, ic.criterion_values[l - 1].loss_term * (1 + 1e-12));
    EXPECT_NEAR(ic.criterion_values[l].penalty, static_cast<double>(l) * ic.penalty_base, 1e-15);
  }
  int best = 0;
  for (int l = 1; l < 4; ++l) {
    if (ic.criterion_values[l].total < ic.criterion_values[best].total) best = l;
  }
  EXPECT_EQ(ic.r_hat, best);
  const double n_plus_t = 60.0;
  EXPECT_NEAR(ic.penalty_base,
              n_plus_t / (10.0 * 90.0) * std::log(90.0 / n_plus_t) * ic.criterion_values[0].loss_term, 1e-14);
  EXPECT_TRUE(ic.warnings.empty());
}

TEST(IcSelect, WarnsWhenKTooSmall) {
  const Matrix y = iid_panel(10, 10, 2);
  TailConfig cfg;
  cfg.k = 15;
  cfg.max_factors = 1;
  FitOptions opts;
  opts.n_restarts = 1;
  const auto ic = ic_select(PanelData(y), cfg, opts);
  ASSERT_FALSE(ic.warnings.empty());
  EXPECT_LT(ic.penalty_base, 0.0);
}

TEST(ValidateThenSelect, NullPanelIsDegenerate) {
  const Matrix y = iid_panel(40, 40, 21);
  TailConfig cfg;
  cfg.k = 160;
  FitOptions opts;
  opts.n_restarts = 1;
  const auto sel = validate_then_select(PanelData(y), cfg, 0.05, opts);
  EXPECT_TRUE(sel.degenerate);
  EXPECT_EQ(sel.r_hat, 0);
  EXPECT_FALSE(sel.ic.has_value());
}

TEST(ValidateThenSelect, StrongFactorIsDetected) {
  const DgpSample s = generate(DgpSpec{1, 60, 60, 2.0, 5});
  TailConfig cfg;
  cfg.k = 360;
  FitOptions opts;
  opts.n_restarts = 1;
  const auto sel = validate_then_select(s.panel, cfg, 0.05, opts);
  EXPECT_FALSE(sel.degenerate);
  EXPECT_GE(sel.r_hat, 1);
  ASSERT_TRUE(sel.ic.has_value());
}
