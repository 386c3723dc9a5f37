#include "tailfactor/check_loss.hpp"

#include <cmath>
#include <string>

#include "tailfactor/error.hpp"

namespace tailfactor {

void require_tail_level(double tau, const char* what) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ArgumentError(std::string(what) + " must lie in (0, 1), got " + std::to_string(tau));
  }
}

double check_loss(double x, double tau) {
  require_tail_level(tau, "check_loss level tau");
  return check_loss_unchecked(x, tau);
}

double check_loss_sum(const Matrix& values, const Matrix& fitted, double tau) {
  if (values.rows() != fitted.rows() || values.cols() != fitted.cols()) {
    throw ArgumentError("check_loss_sum: shape mismatch");
  }
  double total = 0.0;
  for (Eigen::Index t = 0; t < values.cols(); ++t) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      total += check_loss_unchecked(values(i, t) - fitted(i, t), tau);
    }
  }
  return total;
}

}  // namespace tailfactor
