#include "tailfactor/selection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tailfactor/check_loss.hpp"
#include "tailfactor/error.hpp"
#include "tailfactor/parallel.hpp"

namespace tailfactor {

double ks_statistic(const Matrix& values, std::size_t k) {
  const std::size_t n = static_cast<std::size_t>(values.size());
  if (k < 1 || k >= n) {
    throw ArgumentError("ks_statistic: k must satisfy 1 <= k < NT=" + std::to_string(n) +
                        ", got k=" + std::to_string(k));
  }
  const std::vector<double> flat = pooled(values);
  const double u = order_statistic_quantile(flat, k);
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  double count = 0.0;
  double sup = 0.0;
  for (std::size_t j = 0; j <= n; ++j) {
    if (j > 0 && flat[j - 1] >= u) count += 1.0;
    const double share = count / kd;
    sup = std::max(sup, std::abs(share - static_cast<double>(j) / nd));
    if (j < n) sup = std::max(sup, std::abs(share - static_cast<double>(j + 1) / nd));
  }
  return std::sqrt(kd) * sup;
}

double ks_statistic(const PanelData& panel, std::size_t k) { return ks_statistic(panel.values(), k); }

double ks_pvalue(double x) {
  if (!(x >= 0.0)) throw ArgumentError("ks_pvalue: statistic must be nonnegative");
  if (x == 0.0) return 1.0;
  double p = 0.0;
  if (x >= 1.0) {
    double sum = 0.0;
    for (int j = 1; j < 1000; ++j) {
      const double term = std::exp(-2.0 * j * j * x * x);
      sum += (j % 2 == 1) ? term : -term;
      if (term < 1e-12) break;
    }
    p = 2.0 * sum;
  } else {
    // Jacobi form of the same distribution converges fast for small x.
    double sum = 0.0;
    for (int j = 1; j < 1000; ++j) {
      const double odd = 2.0 * j - 1.0;
      const double term = std::exp(-odd * odd * M_PI * M_PI / (8.0 * x * x));
      sum += term;
      if (term < 1e-12) break;
    }
    p = 1.0 - std::sqrt(2.0 * M_PI) / x * sum;
  }
  return std::clamp(p, 0.0, 1.0);
}

KsReport ks_test(const Matrix& values, std::size_t k) {
  KsReport rep;
  rep.k = k;
  rep.statistic = ks_statistic(values, k);
  rep.p_value = ks_pvalue(rep.statistic);
  for (double level : {0.10, 0.05, 0.01}) rep.reject_at[level] = rep.p_value < level;
  rep.note = "p-value from the Brownian-bridge limit, valid under the degenerate (r = 0) hypothesis";
  return rep;
}

void require_alpha(double alpha) {
  for (double level : {0.10, 0.05, 0.01}) {
    if (std::abs(alpha - level) < 1e-12) return;
  }
  throw ArgumentError("alpha must be one of 0.10, 0.05, 0.01, got " + std::to_string(alpha));
}

IcReport ic_select(const PanelData& panel, const TailConfig& cfg, const FitOptions& opts, bool warm_chain) {
  cfg.validate(panel.n_cells());
  opts.validate();
  const std::size_t N = panel.n_units();
  const std::size_t T = panel.n_times();
  const int r_max = cfg.max_factors;
  if (static_cast<std::size_t>(r_max) > std::min(N, T)) {
    throw ArgumentError("ic_select: r_max=" + std::to_string(r_max) + " exceeds min(N, T)");
  }
  const double kd = static_cast<double>(cfg.k);
  const double tau = kd / static_cast<double>(panel.n_cells());
  const double u = order_statistic_quantile(panel.pooled(), cfg.k);
  if (!(u > 0.0)) throw DomainError("ic_select: the k-th largest observation is not positive");

  IcReport rep;
  const Matrix Z = panel.values() / u;
  const double loss0 = check_loss_sum(Z, Matrix::Ones(Z.rows(), Z.cols()), tau) / kd;
  const double nt_sum = static_cast<double>(N + T);
  rep.penalty_base = nt_sum / (cfg.ic_constant * kd) * std::log(kd / nt_sum) * loss0;
  if (cfg.k <= N + T) {
    std::ostringstream msg;
    msg << "k=" << cfg.k << " <= N+T=" << N + T << ": the penalty is nonpositive and selection is unreliable";
    rep.warnings.push_back(msg.str());
  }

  rep.fits.resize(static_cast<std::size_t>(r_max));
  if (warm_chain) {
    for (int l = 1; l <= r_max; ++l) {
      const FactorModel* warm = l > 1 ? &rep.fits[static_cast<std::size_t>(l - 2)].model : nullptr;
      rep.fits[static_cast<std::size_t>(l - 1)] = fit_ftvm(panel, l, cfg, opts, warm);
    }
  } else {
    FitOptions inner = opts;
    inner.threads = 1;
    parallel_for(static_cast<std::size_t>(r_max), opts.threads, [&](std::size_t idx) {
      rep.fits[idx] = fit_ftvm(panel, static_cast<int>(idx) + 1, cfg, inner);
    });
  }

  rep.criterion_values.resize(static_cast<std::size_t>(r_max) + 1);
  for (int l = 0; l <= r_max; ++l) {
    auto& term = rep.criterion_values[static_cast<std::size_t>(l)];
    term.loss_term = l == 0 ? loss0 : rep.fits[static_cast<std::size_t>(l - 1)].final_loss / kd;
    term.penalty = l * rep.penalty_base;
    term.total = term.loss_term + term.penalty;
    if (term.total < rep.criterion_values[static_cast<std::size_t>(rep.r_hat)].total) rep.r_hat = l;
  }
  return rep;
}

Selection validate_then_select(const PanelData& panel, const TailConfig& cfg, double alpha,
                               const FitOptions& opts) {
  require_alpha(alpha);
  cfg.validate(panel.n_cells());
  Selection sel;
  sel.ks = ks_test(panel.values(), cfg.k);
  if (sel.ks.p_value < alpha) {
    sel.ic = ic_select(panel, cfg, opts);
    sel.r_hat = sel.ic->r_hat;
    sel.degenerate = sel.r_hat == 0;
  }
  return sel;
}

}  // namespace tailfactor
