#pragma once

#include <optional>

#include "tailfactor/ftvm.hpp"
#include "tailfactor/selection.hpp"
#include "tailfactor/threshold.hpp"

namespace tailfactor {

struct EotOverrides {
  bool force_degenerate = false;   ///< skip selection and use r = 0 (EoTM-0)
  std::optional<int> force_r;      ///< skip selection and fit this r (EoTM-1 with 1)
};

struct EoTResult {
  ThresholdModel threshold_model;
  Matrix threshold_surface;
  Matrix excess_panel;
  double u_adj = 0.0;
  double gamma_adj = 0.0;
  KsReport ks_adj;
  int r_selected = 0;
  std::optional<IcReport> ic;
  std::optional<FitResult> fit;    ///< excess fit at r_selected (absent for r = 0)
  Matrix excess_surface;           ///< fitted l_i'f_t (all ones for r = 0)
  Matrix intermediate_surface;
  std::optional<double> extreme_level;
  Matrix extreme_surface;          ///< empty unless an extreme level was configured
  std::size_t k = 0;
  std::size_t n = 0;
};

/// Excess-over-threshold pipeline:
///   1. H = fit_threshold(...) at tau*; 2. E = Y - H;
///   3. U_adj = k-th largest excess; 4. gamma_adj = Hill on E;
///   5. KS on E; 6. not rejected at alpha: H + U_adj (and its Weissman
///   extrapolation); 7. otherwise select r on E by the IC and use
///   H + L'F U_adj. Throws NumericalError when fewer than k excesses are
///   positive.
EoTResult run_eot(const PanelData& panel, const Covariates* covariates, const ThresholdModel& model,
                  const TailConfig& cfg, double alpha, const FitOptions& opts, const EotOverrides& overrides = {});

/// Steps 2 onward with a given threshold surface.
EoTResult run_eot_with_threshold(const PanelData& panel, const Matrix& threshold, const TailConfig& cfg,
                                 double alpha, const FitOptions& opts, const EotOverrides& overrides = {});

}  // namespace tailfactor
