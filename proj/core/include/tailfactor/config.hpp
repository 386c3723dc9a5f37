#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include <Eigen/Dense>

namespace tailfactor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Tail-estimation settings shared by the fit, selection and EoT stages.
///
/// Quantile levels follow the *upper-tail* convention throughout: a level
/// `tau` addresses the (1 - tau)-quantile, so small levels mean far right
/// tail. `k / (N*T)` is the intermediate level and `extreme_level` (p) the
/// extreme level.
struct TailConfig {
  std::size_t k = 0;                     ///< intermediate order statistic
  double lower = 0.1;                    ///< m: strict lower bound on l_i'f_t
  double upper = 1.6;                    ///< M: upper bound on l_i'f_t
  std::optional<double> extreme_level;   ///< p, must satisfy 0 < p < k/(NT)
  double central_level = 0.5;            ///< tau*, threshold-model level
  double ic_constant = 10.0;             ///< c in the IC penalty
  int max_factors = 3;                   ///< r*, largest factor count scanned

  /// Throws ArgumentError naming the offending field. `n_cells` is N*T.
  void validate(std::size_t n_cells) const;
};

struct FitOptions {
  int max_outer_iters = 100;
  double loss_rel_tol = 1e-6;
  /// 0 solves every constrained subproblem exactly; a positive value
  /// evaluates that many equally spaced feasible candidates instead.
  int inner_grid = 0;
  std::uint64_t seed = 0;
  int n_restarts = 5;
  /// Worker threads used inside a fit's half-steps. 1 = serial.
  int threads = 1;

  void validate() const;
};

/// k = max(1, round(fraction * n_cells)).
std::size_t k_from_fraction(double fraction, std::size_t n_cells);

}  // namespace tailfactor
