#include "tailfactor/metrics.hpp"

#include <cmath>

#include "tailfactor/error.hpp"

namespace tailfactor {
namespace {

Matrix scaled_surface(const Matrix& L, const Matrix& F, double scale, Eigen::Index N, Eigen::Index T) {
  if (L.rows() != F.rows()) throw ArgumentError("msre: L and F differ in factor count");
  if (F.rows() == 0) return Matrix::Constant(N, T, scale);
  if (L.cols() != N || F.cols() != T) throw ArgumentError("msre: model shape does not match the truth");
  return L.transpose() * F * scale;
}

}  // namespace

double msre_surface(const Matrix& fitted, const Matrix& truth, double reference) {
  if (fitted.rows() != truth.rows() || fitted.cols() != truth.cols()) {
    throw ArgumentError("msre: fitted and true surfaces differ in shape");
  }
  if (!(reference > 0.0)) throw ArgumentError("msre: reference quantile must be positive");
  return ((fitted - truth) / reference).squaredNorm() / static_cast<double>(truth.size());
}

double msre(const Matrix& L, const Matrix& F, double scale, const Matrix& true_quantiles, double reference) {
  return msre_surface(scaled_surface(L, F, scale, true_quantiles.rows(), true_quantiles.cols()), true_quantiles,
                      reference);
}

double msre_eot(const Matrix& H, const Matrix& L, const Matrix& F, double scale, const Matrix& true_quantiles,
                double reference) {
  if (H.rows() != true_quantiles.rows() || H.cols() != true_quantiles.cols()) {
    throw ArgumentError("msre_eot: threshold surface shape does not match the truth");
  }
  return msre_surface(H + scaled_surface(L, F, scale, H.rows(), H.cols()), true_quantiles, reference);
}

AlignmentScore align_and_score(const Matrix& F_true, const Matrix& F_hat, const Matrix& L_true,
                               const Matrix& L_hat) {
  if (F_true.rows() != F_hat.rows() || F_true.cols() != F_hat.cols() || L_true.rows() != L_hat.rows() ||
      L_true.cols() != L_hat.cols() || F_true.rows() != L_true.rows()) {
    throw ArgumentError("align_and_score: shape mismatch");
  }
  const auto r = F_true.rows();
  AlignmentScore out;
  out.sign = Matrix::Zero(r, r);
  const Matrix cross = F_true * F_hat.transpose();
  for (Eigen::Index j = 0; j < r; ++j) out.sign(j, j) = cross(j, j) < 0.0 ? -1.0 : 1.0;
  out.loading_rmse = (L_hat - out.sign * L_true).norm() / std::sqrt(static_cast<double>(L_true.cols()));
  out.factor_rmse = (F_hat - out.sign * F_true).norm() / std::sqrt(static_cast<double>(F_true.cols()));
  return out;
}

}  // namespace tailfactor
