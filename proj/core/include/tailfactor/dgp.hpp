#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "tailfactor/config.hpp"
#include "tailfactor/panel.hpp"

namespace tailfactor {

struct DgpSpec {
  int dgp = 1;  ///< 1..5
  std::size_t N = 50;
  std::size_t T = 50;
  double lambda = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Stream ids of the counter-based generator; each component draws from
/// its own stream so components are reproducible independently.
enum class DgpStream : std::uint64_t {
  loadings = 1,
  factors = 2,
  innovations = 3,
  signs = 4,
  unit_effects = 5,
  time_effects = 6,
  covariates = 7,
  coefficients = 8,
};

struct DgpSample {
  PanelData panel;
  Matrix true_loadings;                    ///< r x N
  Matrix true_factors;                     ///< r x T
  Matrix innovations;                      ///< u_it (Pareto or Student-t)
  Matrix signs;                            ///< Rademacher b_it (DGP1-3), else empty
  std::optional<Matrix> true_threshold;    ///< location a_i b_t or x_it'b_i (DGP4-5)
  std::optional<Covariates> covariates;    ///< DGP5
  Matrix coefficients;                     ///< DGP5: N x 2 b_i
  double c_sample = 0.0;                   ///< {(NT)^-1 sum (l_i'f_t)^lambda}^(1/lambda) of this draw
};

/// Volatility components only (cheaper than a full sample).
std::pair<Matrix, Matrix> generate_volatility(const DgpSpec& spec);

DgpSample generate(const DgpSpec& spec);

/// Largest sigma2 with sigma1 >= sigma2 >= 0 and
/// 0.1 <= v_i' diag(sigma1, sigma2) w_t <= 5 for all (i, t), the smallest
/// such sigma1 on ties. V is 2 x N, W is 2 x T; V(0, .) * W(0, .) must be
/// positive. Throws InfeasibleError when no point satisfies the bounds.
std::pair<double, double> dgp3_lp(const Matrix& V, const Matrix& W);

struct ReferenceConstant {
  double value = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo mean over `reps` volatility draws (seeds derived from
/// spec.seed) of {(NT)^-1 sum (l_i'f_t)^lambda}^(1/lambda).
ReferenceConstant reference_constant(const DgpSpec& spec, int reps);

double power_mean(const Matrix& surface, double lambda);

/// Upper-tail quantile at level tau of a unit innovation: (2 tau)^(-1/lambda)
/// for the signed Pareto of DGP1-3, the Student-t (1 - tau)-quantile for
/// DGP4-5.
double innovation_quantile(int dgp, double lambda, double tau);

/// Reference tail quantile U(1/tau) = c * innovation_quantile(tau).
double reference_quantile(int dgp, double lambda, double c, double tau);

/// True conditional (1 - tau)-quantile of every cell.
Matrix true_quantile_surface(const DgpSample& sample, int dgp, double lambda, double tau);

}  // namespace tailfactor
