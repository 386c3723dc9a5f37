#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "tailfactor/config.hpp"

namespace tailfactor {

/// Pooled intermediate quantile and tail index of a sample of size n.
struct TailEstimates {
  double u_intermediate = 0.0;        ///< k-th largest value, no interpolation
  std::optional<double> gamma_hat;    ///< Hill estimate, absent when not computable
  std::size_t k = 0;
  std::size_t n = 0;
};

/// k-th largest value (k = 1 is the maximum); duplicates count separately.
double order_statistic_quantile(std::vector<double> values, std::size_t k);

/// Hill estimator (1/k) sum_{i=1..k} log y_(i) - log y_(k), y_(i) the i-th
/// largest value. Requires 2 <= k < n and y_(k) > 0; otherwise DomainError
/// or ArgumentError.
double hill(std::vector<double> values, std::size_t k);

/// u * (k / (n p))^gamma, defined for 0 < p < k/n.
double weissman_extrapolate(double u_intermediate, double gamma_hat, std::size_t k,
                            std::size_t n, double p);

/// Both estimators from one sort. When `require_gamma` is false a Hill
/// failure leaves gamma_hat empty instead of throwing.
TailEstimates estimate_tail(std::vector<double> values, std::size_t k, bool require_gamma = true);

struct HillPoint {
  std::size_t k;
  double gamma_hat;
  double u_intermediate;
};

/// Hill estimates for k = k_min..k_max (k < n), stopping at the first
/// nonpositive order statistic.
std::vector<HillPoint> hill_plot(std::vector<double> values, std::size_t k_min, std::size_t k_max);

}  // namespace tailfactor
