#pragma once

#include "tailfactor/config.hpp"

namespace tailfactor {

/// Check (pinball) loss at upper-tail level `tau`:
///   rho_tau(x) = (1{x > 0} - tau) * x.
/// Positive residuals cost (1 - tau) per unit and negative residuals tau, so
/// the minimiser of sum_j rho_tau(z_j - q) is an empirical (1 - tau)-quantile.
/// Throws ArgumentError unless 0 < tau < 1.
double check_loss(double x, double tau);

/// Unchecked variant for hot loops; caller guarantees tau in (0, 1).
inline double check_loss_unchecked(double x, double tau) noexcept {
  return x > 0.0 ? (1.0 - tau) * x : -tau * x;
}

/// Sum of check losses of `values - fitted` over all cells.
double check_loss_sum(const Matrix& values, const Matrix& fitted, double tau);

void require_tail_level(double tau, const char* what);

}  // namespace tailfactor
