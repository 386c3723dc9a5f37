#pragma once

#include "tailfactor/config.hpp"

namespace tailfactor {

/// Mean over cells of ((fitted - truth) / reference)^2.
double msre_surface(const Matrix& fitted, const Matrix& truth, double reference);

/// Surface l_i'f_t * scale scored against the true quantiles. An r = 0
/// model (empty L and F) stands for the constant surface `scale`.
double msre(const Matrix& L, const Matrix& F, double scale, const Matrix& true_quantiles, double reference);

/// Same with an additive threshold surface H in front.
double msre_eot(const Matrix& H, const Matrix& L, const Matrix& F, double scale, const Matrix& true_quantiles,
                double reference);

struct AlignmentScore {
  Matrix sign;              ///< r x r diagonal, sgn of diag(F_true F_hat')
  double loading_rmse = 0.0;
  double factor_rmse = 0.0;
};

/// Sign-aligned errors N^-1/2 ||L_hat - S L_true||_F and
/// T^-1/2 ||F_hat - S F_true||_F.
AlignmentScore align_and_score(const Matrix& F_true, const Matrix& F_hat, const Matrix& L_true,
                               const Matrix& L_hat);

}  // namespace tailfactor
