#include "tailfactor/eot.hpp"

#include <cmath>
#include <string>

#include "tailfactor/error.hpp"
#include "tailfactor/evt.hpp"

namespace tailfactor {

EoTResult run_eot_with_threshold(const PanelData& panel, const Matrix& threshold, const TailConfig& cfg,
                                 double alpha, const FitOptions& opts, const EotOverrides& overrides) {
  require_alpha(alpha);
  cfg.validate(panel.n_cells());
  opts.validate();
  if (threshold.rows() != panel.values().rows() || threshold.cols() != panel.values().cols()) {
    throw ArgumentError("threshold surface shape does not match the panel");
  }
  if (overrides.force_degenerate && overrides.force_r) {
    throw ArgumentError("force_degenerate and force_r are mutually exclusive");
  }
  const auto N = panel.values().rows();
  const auto T = panel.values().cols();
  EoTResult res;
  res.k = cfg.k;
  res.n = panel.n_cells();
  res.threshold_surface = threshold;
  res.excess_panel = panel.values() - threshold;
  const PanelData excess = panel.with_values(res.excess_panel);

  const TailEstimates tail = estimate_tail(excess.pooled(), cfg.k, false);
  res.u_adj = tail.u_intermediate;
  if (!(res.u_adj > 0.0) || !tail.gamma_hat) {
    throw NumericalError("fewer than k=" + std::to_string(cfg.k) +
                         " positive excesses over the threshold; use a smaller k or a lower tau*");
  }
  res.gamma_adj = *tail.gamma_hat;
  res.ks_adj = ks_test(res.excess_panel, cfg.k);

  if (overrides.force_r) {
    res.r_selected = *overrides.force_r;
    if (res.r_selected > 0) res.fit = fit_ftvm(excess, res.r_selected, cfg, opts);
  } else if (!overrides.force_degenerate && res.ks_adj.p_value < alpha) {
    res.ic = ic_select(excess, cfg, opts);
    res.r_selected = res.ic->r_hat;
    if (res.r_selected > 0) res.fit = res.ic->fits[static_cast<std::size_t>(res.r_selected - 1)];
  }
  res.excess_surface = res.fit ? res.fit->model.surface(N, T) : Matrix::Ones(N, T);
  res.intermediate_surface = threshold + res.excess_surface * res.u_adj;
  if (cfg.extreme_level) {
    res.extreme_level = cfg.extreme_level;
    const double factor = weissman_extrapolate(1.0, res.gamma_adj, cfg.k, res.n, *cfg.extreme_level);
    res.extreme_surface = threshold + res.excess_surface * (res.u_adj * factor);
  }
  return res;
}

EoTResult run_eot(const PanelData& panel, const Covariates* covariates, const ThresholdModel& model,
                  const TailConfig& cfg, double alpha, const FitOptions& opts, const EotOverrides& overrides) {
  require_alpha(alpha);
  cfg.validate(panel.n_cells());
  const ThresholdFit thr = fit_threshold(panel, covariates, model, cfg.central_level, opts);
  EoTResult res = run_eot_with_threshold(panel, thr.surface, cfg, alpha, opts, overrides);
  res.threshold_model = model;
  return res;
}

}  // namespace tailfactor
