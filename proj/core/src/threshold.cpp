#include "tailfactor/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "tailfactor/check_loss.hpp"
#include "tailfactor/error.hpp"
#include "tailfactor/evt.hpp"
#include "tailfactor/line_solvers.hpp"
#include "tailfactor/parallel.hpp"

namespace tailfactor {

ThresholdKind parse_threshold_kind(std::string_view name) {
  if (name == "constant") return ThresholdKind::constant;
  if (name == "qfm") return ThresholdKind::qfm;
  if (name == "qr" || name == "per_unit_qr" || name == "qrife") return ThresholdKind::per_unit_qr;
  throw ArgumentError("unknown threshold model '" + std::string(name) + "' (expected constant, qfm or qr)");
}

const char* to_string(ThresholdKind kind) {
  switch (kind) {
    case ThresholdKind::constant: return "constant";
    case ThresholdKind::qfm: return "qfm";
    case ThresholdKind::per_unit_qr: return "per_unit_qr";
  }
  return "?";
}

namespace {

// Clips to the pooled `share` and 1 - `share` quantiles. Used only for the
// starting SVD: one extreme cell would otherwise own the leading singular
// pair and trap the alternation next to it.
Matrix winsorize(const Matrix& values, double share) {
  std::vector<double> flat(values.data(), values.data() + values.size());
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(share * static_cast<double>(flat.size())));
  const double hi = order_statistic_quantile(flat, k);
  for (auto& v : flat) v = -v;
  const double lo = -order_statistic_quantile(std::move(flat), k);
  return values.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

QfmFit fit_qfm(const Matrix& values, int r, double tau, const FitOptions& opts) {
  require_tail_level(tau, "qfm level tau");
  const auto N = values.rows();
  const auto T = values.cols();
  if (r < 1 || r > std::min(N, T)) throw ArgumentError("fit_qfm: r must satisfy 1 <= r <= min(N, T)");
  auto full_rank = [r](const Eigen::BDCSVD<Matrix>& d) {
    const auto& sv = d.singularValues();
    return sv[r - 1] > 1e-12 * std::max(sv[0], 1e-300);
  };
  Eigen::BDCSVD<Matrix> svd(winsorize(values, 0.01), Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (!full_rank(svd)) {
    svd.compute(values, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (!full_rank(svd)) throw RankError("fit_qfm: the panel has rank below r=" + std::to_string(r));
  }
  const auto& sv = svd.singularValues();
  QfmFit fit;
  const Vector root = sv.head(r).cwiseSqrt();
  fit.loadings = (svd.matrixU().leftCols(r) * root.asDiagonal()).transpose();
  fit.factors = (svd.matrixV().leftCols(r) * root.asDiagonal()).transpose();

  const double inf = std::numeric_limits<double>::infinity();
  VectorQrOptions qr_opts;
  qr_opts.grid = 0;
  if (r == 1) qr_opts.max_cycles = 1;
  const Matrix Yt = values.transpose();
  auto loss_now = [&] { return check_loss_sum(values, fit.loadings.transpose() * fit.factors, tau); };
  double loss = loss_now();
  for (int iter = 0; iter < opts.max_outer_iters; ++iter) {
    const double before = loss;
    parallel_for(static_cast<std::size_t>(N), opts.threads, [&](std::size_t i) {
      const auto idx = static_cast<Eigen::Index>(i);
      const auto row = Yt.col(idx);
      const Vector v0 = fit.loadings.col(idx);
      fit.loadings.col(idx) =
          solve_vector_qr({row.data(), static_cast<std::size_t>(T)}, fit.factors, tau, -inf, inf, v0, qr_opts);
    });
    parallel_for(static_cast<std::size_t>(T), opts.threads, [&](std::size_t t) {
      const auto idx = static_cast<Eigen::Index>(t);
      const auto col = values.col(idx);
      const Vector v0 = fit.factors.col(idx);
      fit.factors.col(idx) =
          solve_vector_qr({col.data(), static_cast<std::size_t>(N)}, fit.loadings, tau, -inf, inf, v0, qr_opts);
    });
    loss = loss_now();
    fit.iterations = iter + 1;
    if (before - loss <= opts.loss_rel_tol * std::max(before, std::numeric_limits<double>::min())) break;
  }
  fit.surface = fit.loadings.transpose() * fit.factors;
  fit.loss = loss;
  return fit;
}

ThresholdFit fit_per_unit_qr(const PanelData& panel, const Covariates& cov, double tau, int threads) {
  require_tail_level(tau, "quantile regression level tau");
  const auto N = static_cast<Eigen::Index>(panel.n_units());
  const auto T = static_cast<Eigen::Index>(panel.n_times());
  if (cov.dim() == 0) throw ArgumentError("per-unit quantile regression needs at least one covariate");
  for (const auto& layer : cov.layers) {
    if (layer.rows() != N || layer.cols() != T) {
      throw ArgumentError("covariate layer shape does not match the panel");
    }
  }
  const auto p = static_cast<Eigen::Index>(cov.dim()) + 1;
  if (T < p) throw ArgumentError("per-unit quantile regression needs T >= d + 1");
  ThresholdFit fit;
  fit.surface.resize(N, T);
  fit.coefficients.resize(N, p);
  parallel_for(static_cast<std::size_t>(N), threads, [&](std::size_t iu) {
    const auto i = static_cast<Eigen::Index>(iu);
    Matrix X(T, p);
    X.col(0).setOnes();
    for (Eigen::Index d = 0; d + 1 < p; ++d) X.col(d + 1) = cov.layers[static_cast<std::size_t>(d)].row(i).transpose();
    const Vector y = panel.values().row(i).transpose();
    const Vector beta = linear_quantile_regression(X, y, tau, 1e-10);
    fit.coefficients.row(i) = beta.transpose();
    fit.surface.row(i) = (X * beta).transpose();
  });
  return fit;
}

ThresholdFit fit_threshold(const PanelData& panel, const Covariates* covariates, const ThresholdModel& model,
                           double tau_star, const FitOptions& opts) {
  require_tail_level(tau_star, "central level tau*");
  const auto N = static_cast<Eigen::Index>(panel.n_units());
  const auto T = static_cast<Eigen::Index>(panel.n_times());
  switch (model.kind) {
    case ThresholdKind::constant: {
      const auto n = panel.n_cells();
      auto rank = static_cast<std::size_t>(std::ceil(tau_star * static_cast<double>(n) - 1e-9));
      rank = std::clamp<std::size_t>(rank, 1, n);
      ThresholdFit fit;
      fit.surface = Matrix::Constant(N, T, order_statistic_quantile(panel.pooled(), rank));
      return fit;
    }
    case ThresholdKind::qfm: {
      if (model.r_thr < 1) throw ArgumentError("qfm threshold needs r_thr >= 1");
      ThresholdFit fit;
      fit.surface = fit_qfm(panel.values(), model.r_thr, tau_star, opts).surface;
      return fit;
    }
    case ThresholdKind::per_unit_qr:
      if (covariates == nullptr) throw ArgumentError("per_unit_qr threshold requires covariates");
      return fit_per_unit_qr(panel, *covariates, tau_star, opts.threads);
  }
  throw ArgumentError("unsupported threshold model");
}

}  // namespace tailfactor
