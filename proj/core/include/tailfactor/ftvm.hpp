#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "tailfactor/config.hpp"
#include "tailfactor/evt.hpp"
#include "tailfactor/panel.hpp"

namespace tailfactor {

/// Loadings L (r x N) and factors F (r x T); the volatility surface is L'F.
struct FactorModel {
  Matrix loadings;
  Matrix factors;

  int r() const noexcept { return static_cast<int>(factors.rows()); }
  /// N x T matrix of l_i'f_t. An r = 0 model yields the constant surface 1.
  Matrix surface(Eigen::Index n_units, Eigen::Index n_times) const;
};

struct FitResult {
  FactorModel model;
  TailEstimates tail;
  /// sum over cells of rho_tau(Y / U - l_i'f_t) at tau = k / NT.
  double final_loss = 0.0;
  /// Objective after every half-step (unit pass, then time pass) of the
  /// winning restart; element 0 is the starting point.
  std::vector<double> loss_trace;
  int restarts_used = 0;
  int iterations = 0;
  double tau = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Constrained check-loss factorisation of Y / U(NT/k) with
/// m < l_i'f_t <= M, fitted by alternating exact quantile regressions over
/// units and times from `opts.n_restarts` starts (plus `warm_start` when
/// given, padded with a zero-loading factor if it has r - 1 factors). The
/// best restart is returned identification-normalised.
FitResult fit_ftvm(const PanelData& panel, int r, const TailConfig& cfg, const FitOptions& opts,
                   const FactorModel* warm_start = nullptr);

/// Rotates (L, F) so that F F'/T = I and L L'/N is diagonal and
/// nonincreasing, preserving L'F. Each factor row is signed so that its
/// first nonzero entry is positive; the returned diagonal matrix holds the
/// signs applied after rotation. Throws RankError for singular F F'.
std::pair<FactorModel, Matrix> normalize_identification(const FactorModel& model);

/// Tail level for quantile surfaces: intermediate (k/NT) when `p` is empty,
/// otherwise the extreme level p.
struct QuantileLevel {
  std::optional<double> p;
};

/// l_i'f_t U(NT/k), times (k/(NT p))^gamma at an extreme level.
Matrix predict_quantiles(const FitResult& fit, const QuantileLevel& level);

/// The fit objective for scaled data `scaled` (Y / U) and `model`.
double ftvm_objective(const Matrix& scaled, const FactorModel& model, double tau);

}  // namespace tailfactor
