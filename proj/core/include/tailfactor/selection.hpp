#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tailfactor/ftvm.hpp"

namespace tailfactor {

struct KsReport {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t k = 0;
  /// Levels 0.10, 0.05, 0.01 mapped to p_value < level.
  std::map<double, bool> reject_at;
  /// The Brownian-bridge limit only holds under the degenerate hypothesis;
  /// rejection frequencies under alternatives are empirical.
  std::string note;
};

/// sqrt(k) times the largest gap between the running share of exceedances
/// (cells >= the k-th largest value, time-major order) and the share of
/// cells visited, evaluated at every breakpoint.
double ks_statistic(const Matrix& values, std::size_t k);
double ks_statistic(const PanelData& panel, std::size_t k);

/// P(sup |B| > x) for a Brownian bridge B.
double ks_pvalue(double statistic);

KsReport ks_test(const Matrix& values, std::size_t k);

struct IcTerm {
  double loss_term = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

struct IcReport {
  int r_hat = 0;
  std::vector<IcTerm> criterion_values;  ///< index l = 0..r_max
  double penalty_base = 0.0;
  std::vector<std::string> warnings;
  /// fits[l - 1] is the model fitted with l factors.
  std::vector<FitResult> fits;
};

/// Information criterion over l = 0..r_max: loss_term(l) is the mean check
/// loss per exceedance (sum / k) of the l-factor fit, and total(l) adds
/// l * P with P = ((N+T)/(c k)) log(k/(N+T)) loss_term(0). With
/// `warm_chain` each l starts from the l - 1 solution so loss_term is
/// nonincreasing; otherwise the l fits are independent and may run on
/// `opts.threads` workers.
IcReport ic_select(const PanelData& panel, const TailConfig& cfg, const FitOptions& opts,
                   bool warm_chain = true);

struct Selection {
  bool degenerate = true;
  int r_hat = 0;
  KsReport ks;
  std::optional<IcReport> ic;
};

/// KS test at `alpha` (0.10, 0.05 or 0.01); when it rejects, the IC picks r.
Selection validate_then_select(const PanelData& panel, const TailConfig& cfg, double alpha,
                               const FitOptions& opts);

void require_alpha(double alpha);

}  // namespace tailfactor
