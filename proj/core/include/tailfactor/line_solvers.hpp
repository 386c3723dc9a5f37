#pragma once

#include <span>

#include "tailfactor/config.hpp"

namespace tailfactor {

/// Exact minimiser over a in [lo, hi] of sum_t rho_tau(w_t - a * x_t) for
/// signed x_t. Among minimisers the smallest breakpoint w_t / x_t is taken
/// before clamping. When every x_t is zero, or lo > hi, `current` is kept.
double solve_line_qr(std::span<const double> w, std::span<const double> x, double tau, double lo,
                     double hi, double current);

/// Same objective evaluated at `a`.
double line_loss(std::span<const double> w, std::span<const double> x, double tau, double a);

/// argmin over l in [lower, upper] of sum_t rho_tau(z_t - l f_t) with all
/// f_t > 0: a clamped f-weighted (1 - tau)-quantile of the ratios z_t / f_t.
double solve_scale_qr(std::span<const double> z, std::span<const double> f, double tau, double lower,
                      double upper);

struct VectorQrOptions {
  int max_cycles = 50;
  double rel_tol = 1e-9;
  /// Positive: each coordinate update scans this many candidates in its
  /// feasible interval instead of solving exactly.
  int grid = 0;
};

/// Approximate minimiser of sum_t rho_tau(z_t - v'F_t) subject to
/// lower_t <= v'F_t <= upper_t, by cyclic coordinate descent from the
/// feasible start `v0`. Never increases the loss of `v0`; throws
/// InfeasibleError when `v0` violates a bound.
Vector solve_vector_qr(std::span<const double> z, const Matrix& F, double tau, const Vector& lower,
                       const Vector& upper, const Vector& v0, const VectorQrOptions& opts = {});

/// Scalar-bound convenience overload.
Vector solve_vector_qr(std::span<const double> z, const Matrix& F, double tau, double lower,
                       double upper, const Vector& v0, const VectorQrOptions& opts = {});

/// Linear quantile regression of y on the columns of X at upper-tail level
/// `tau` (the (1 - tau)-quantile). MM iterations on a perturbed check loss,
/// then an exact-fit polish on the best-fitting observations and exact
/// coordinate descent until the loss stalls below `tol` relative.
Vector linear_quantile_regression(const Matrix& X, const Vector& y, double tau, double tol = 1e-10);

}  // namespace tailfactor
