#pragma once

#include <string_view>

#include "tailfactor/config.hpp"
#include "tailfactor/panel.hpp"

namespace tailfactor {

enum class ThresholdKind { constant, qfm, per_unit_qr };

ThresholdKind parse_threshold_kind(std::string_view name);
const char* to_string(ThresholdKind kind);

struct ThresholdModel {
  ThresholdKind kind = ThresholdKind::qfm;
  int r_thr = 1;  ///< factor count for qfm
};

/// Additive quantile factor model Y ~ A'B at upper-tail level `tau`.
struct QfmFit {
  Matrix loadings;  ///< r x N
  Matrix factors;   ///< r x T
  Matrix surface;   ///< N x T
  double loss = 0.0;
  int iterations = 0;
};

/// Unconstrained alternating check-loss factorisation started from the
/// rank-r SVD of `values` winsorised at its pooled 1% and 99% quantiles.
/// Throws RankError when `values` has rank < r.
QfmFit fit_qfm(const Matrix& values, int r, double tau, const FitOptions& opts);

struct ThresholdFit {
  Matrix surface;
  /// per_unit_qr: N x (1 + d) coefficients, intercept first.
  Matrix coefficients;
};

/// Per-unit linear quantile regression of Y_i. on an intercept and the d
/// covariate layers at upper-tail level `tau`.
ThresholdFit fit_per_unit_qr(const PanelData& panel, const Covariates& cov, double tau, int threads = 1);

/// Central-level threshold surface H at level tau_star (upper-tail
/// convention, so 0.5 is the median):
///   constant     every cell is the ceil(tau_star * NT)-th largest value;
///   qfm          additive quantile factor model with r_thr factors;
///   per_unit_qr  per-unit linear quantile regression on `covariates`.
ThresholdFit fit_threshold(const PanelData& panel, const Covariates* covariates, const ThresholdModel& model,
                           double tau_star, const FitOptions& opts);

}  // namespace tailfactor
