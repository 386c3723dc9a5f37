#include "tailfactor/line_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "tailfactor/check_loss.hpp"
#include "tailfactor/error.hpp"

namespace tailfactor {
namespace {

constexpr double kBoundSlack = 1e-11;

struct Breakpoint {
  double ratio;
  double weight;
};

double grid_line_search(std::span<const double> w, std::span<const double> x, double tau, double lo,
                        double hi, double current, int grid) {
  double best = current;
  double best_loss = line_loss(w, x, tau, current);
  for (int g = 0; g < grid; ++g) {
    const double a = grid == 1 ? lo : lo + (hi - lo) * g / (grid - 1);
    const double loss = line_loss(w, x, tau, a);
    if (loss < best_loss) {
      best_loss = loss;
      best = a;
    }
  }
  return best;
}

}  // namespace

double line_loss(std::span<const double> w, std::span<const double> x, double tau, double a) {
  double total = 0.0;
  for (std::size_t t = 0; t < w.size(); ++t) total += check_loss_unchecked(w[t] - a * x[t], tau);
  return total;
}

double solve_line_qr(std::span<const double> w, std::span<const double> x, double tau, double lo,
                     double hi, double current) {
  if (w.size() != x.size()) throw ArgumentError("solve_line_qr: size mismatch");
  if (lo > hi) return current;
  thread_local std::vector<Breakpoint> points;
  points.clear();
  double slope = 0.0;  // right derivative at -infinity
  for (std::size_t t = 0; t < w.size(); ++t) {
    const double xt = x[t];
    if (xt > 0.0) {
      slope -= (1.0 - tau) * xt;
      points.push_back({w[t] / xt, xt});
    } else if (xt < 0.0) {
      slope += tau * xt;
      points.push_back({w[t] / xt, -xt});
    }
  }
  if (points.empty()) return current;
  std::sort(points.begin(), points.end(),
            [](const Breakpoint& a, const Breakpoint& b) { return a.ratio < b.ratio; });
  double best = points.back().ratio;
  for (const auto& bp : points) {
    slope += bp.weight;
    if (slope >= 0.0) {
      best = bp.ratio;
      break;
    }
  }
  return std::clamp(best, lo, hi);
}

double solve_scale_qr(std::span<const double> z, std::span<const double> f, double tau, double lower,
                      double upper) {
  require_tail_level(tau, "solve_scale_qr level tau");
  if (z.size() != f.size()) throw ArgumentError("solve_scale_qr: z and f differ in length");
  if (!(lower < upper)) throw ArgumentError("solve_scale_qr: need lower < upper");
  for (std::size_t t = 0; t < f.size(); ++t) {
    if (!(f[t] > 0.0)) {
      throw ArgumentError("solve_scale_qr: f[" + std::to_string(t) + "] = " + std::to_string(f[t]) +
                          " is not positive");
    }
  }
  return solve_line_qr(z, f, tau, lower, upper, lower);
}

Vector solve_vector_qr(std::span<const double> z, const Matrix& F, double tau, const Vector& lower,
                       const Vector& upper, const Vector& v0, const VectorQrOptions& opts) {
  const auto r = F.rows();
  const auto T = F.cols();
  if (static_cast<Eigen::Index>(z.size()) != T || v0.size() != r || lower.size() != T ||
      upper.size() != T) {
    throw ArgumentError("solve_vector_qr: shape mismatch");
  }
  Vector v = v0;
  Vector fitted = F.transpose() * v;
  // Absorbs rounding in F'v; callers keep their bounds inside the true ones.
  auto inside = [&](Eigen::Index t, double g) {
    return g >= lower[t] - kBoundSlack * std::max(1.0, std::abs(lower[t])) &&
           g <= upper[t] + kBoundSlack * std::max(1.0, std::abs(upper[t]));
  };
  for (Eigen::Index t = 0; t < T; ++t) {
    if (!inside(t, fitted[t])) {
      throw InfeasibleError("solve_vector_qr: start point violates the bounds at t=" + std::to_string(t) +
                            " (fitted " + std::to_string(fitted[t]) + ")");
    }
  }
  auto loss_of = [&](const Vector& g) {
    double total = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) total += check_loss_unchecked(z[t] - g[t], tau);
    return total;
  };
  double loss = loss_of(fitted);
  std::vector<double> w(static_cast<std::size_t>(T));
  std::vector<double> x(static_cast<std::size_t>(T));

  // Exact line search from v along d; accepts the move only if it keeps
  // every cell feasible and strictly lowers the loss.
  auto step_along = [&](const Vector& d, bool use_grid) {
    Vector dx = F.transpose() * d;
    // Rows held tight by an edge direction come out as rounding noise.
    const double dn = d.norm();
    for (Eigen::Index t = 0; t < T; ++t) {
      if (std::abs(dx[t]) <= 1e-12 * dn * F.col(t).norm()) dx[t] = 0.0;
    }
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < T; ++t) {
      const double xt = dx[t];
      x[t] = xt;
      w[t] = z[t] - fitted[t];
      if (xt > 0.0) {
        lo = std::max(lo, (lower[t] - fitted[t]) / xt);
        hi = std::min(hi, (upper[t] - fitted[t]) / xt);
      } else if (xt < 0.0) {
        lo = std::max(lo, (upper[t] - fitted[t]) / xt);
        hi = std::min(hi, (lower[t] - fitted[t]) / xt);
      }
    }
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
    double s = 0.0;
    if (use_grid && std::isfinite(lo) && std::isfinite(hi)) {
      s = grid_line_search(w, x, tau, lo, hi, 0.0, opts.grid);
    } else {
      s = solve_line_qr(w, x, tau, lo, hi, 0.0);
    }
    if (s == 0.0) return false;
    Vector trial = fitted + s * dx;
    for (Eigen::Index t = 0; t < T; ++t) {
      if (!inside(t, trial[t])) return false;  // rounding pushed a cell out
    }
    const double trial_loss = loss_of(trial);
    if (!(trial_loss < loss)) return false;
    v += s * d;
    fitted = std::move(trial);
    loss = trial_loss;
    return true;
  };

  // Coordinate moves stall at kinks of the piecewise-linear loss. From such
  // a point, move along edges: directions orthogonal to r - 1 of the cells
  // whose residual or bound is tight.
  constexpr std::size_t kMaxEdges = 64;
  auto edge_search = [&]() {
    if (r < 2) return false;
    std::vector<Eigen::Index> tight;
    for (Eigen::Index t = 0; t < T; ++t) {
      const double g = fitted[t];
      const bool at_z = std::abs(z[t] - g) <= 1e-9 * std::max(1.0, std::abs(z[t]));
      const bool at_lo = std::abs(g - lower[t]) <= 1e-9 * std::max(1.0, std::abs(lower[t]));
      const bool at_hi = std::abs(g - upper[t]) <= 1e-9 * std::max(1.0, std::abs(upper[t]));
      if (at_z || at_lo || at_hi) tight.push_back(t);
    }
    bool improved = false;
    if (tight.size() < static_cast<std::size_t>(r)) {
      // Off a vertex the loss is smooth along the null space of the tight
      // rows; try the projected descent direction there.
      Vector grad = Vector::Zero(r);
      std::size_t next_tight = 0;
      for (Eigen::Index t = 0; t < T; ++t) {
        if (next_tight < tight.size() && tight[next_tight] == t) {
          ++next_tight;
          continue;
        }
        const double e = z[t] - fitted[t];
        grad -= ((e > 0.0 ? 1.0 : 0.0) - tau) * F.col(t);
      }
      Vector d = -grad;
      if (!tight.empty()) {
        Matrix rows(static_cast<Eigen::Index>(tight.size()), r);
        for (std::size_t a = 0; a < tight.size(); ++a) rows.row(static_cast<Eigen::Index>(a)) = F.col(tight[a]).transpose();
        Eigen::JacobiSVD<Matrix> svd(rows, Eigen::ComputeFullV);
        const auto rank = svd.rank();
        const Matrix basis = svd.matrixV().rightCols(r - rank);
        d = basis * (basis.transpose() * d);
      }
      if (d.norm() > 1e-14 * std::max(1.0, grad.norm()) && step_along(d, false)) improved = true;
    }
    const auto k = static_cast<std::size_t>(r - 1);
    if (tight.size() < k) return improved;
    std::vector<std::size_t> pick(k);
    std::iota(pick.begin(), pick.end(), 0);
    Matrix rows(static_cast<Eigen::Index>(k), r);
    for (std::size_t count = 0; count < kMaxEdges; ++count) {
      for (std::size_t a = 0; a < k; ++a) rows.row(static_cast<Eigen::Index>(a)) = F.col(tight[pick[a]]).transpose();
      Eigen::JacobiSVD<Matrix> svd(rows, Eigen::ComputeFullV);
      const Vector d = svd.matrixV().col(r - 1);
      if (step_along(d, false)) improved = true;
      // Next combination of k indices out of tight.size().
      std::size_t a = k;
      while (a > 0 && pick[a - 1] == tight.size() - k + a - 1) --a;
      if (a == 0) break;
      ++pick[a - 1];
      for (std::size_t b = a; b < k; ++b) pick[b] = pick[b - 1] + 1;
    }
    return improved;
  };

  for (int cycle = 0; cycle < opts.max_cycles; ++cycle) {
    const double before = loss;
    for (Eigen::Index j = 0; j < r; ++j) step_along(Vector::Unit(r, j), opts.grid > 0);
    if (before - loss <= opts.rel_tol * std::max(before, std::numeric_limits<double>::min())) {
      if (opts.grid > 0 || !edge_search()) break;
    }
  }
  return v;
}

Vector solve_vector_qr(std::span<const double> z, const Matrix& F, double tau, double lower,
                       double upper, const Vector& v0, const VectorQrOptions& opts) {
  const auto T = F.cols();
  return solve_vector_qr(z, F, tau, Vector::Constant(T, lower), Vector::Constant(T, upper), v0, opts);
}

Vector linear_quantile_regression(const Matrix& X, const Vector& y, double tau, double tol) {
  require_tail_level(tau, "quantile regression level tau");
  const auto n = X.rows();
  const auto p = X.cols();
  if (y.size() != n) throw ArgumentError("linear_quantile_regression: X and y differ in rows");
  if (p < 1 || n < p) throw ArgumentError("linear_quantile_regression: need 1 <= p <= n");
  const double q = 1.0 - tau;
  auto loss_of = [&](const Vector& beta) {
    const Vector res = y - X * beta;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) total += check_loss_unchecked(res[i], tau);
    return total;
  };

  Vector beta = X.colPivHouseholderQr().solve(y);
  double loss = loss_of(beta);
  const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  const double eps = 1e-8 * scale;
  const Vector shift = (2.0 * q - 1.0) * X.transpose() * Vector::Ones(n);
  for (int iter = 0; iter < 500; ++iter) {
    const Vector res = y - X * beta;
    const Vector weight = (res.cwiseAbs().array() + eps).inverse().matrix();
    const Matrix xtwx = X.transpose() * weight.asDiagonal() * X;
    const Vector rhs = X.transpose() * weight.asDiagonal() * y + shift;
    Vector next = xtwx.ldlt().solve(rhs);
    if (!next.allFinite()) break;
    const double next_loss = loss_of(next);
    const bool stalled = loss - next_loss <= tol * std::max(loss, 1e-300);
    if (next_loss < loss) {
      beta = std::move(next);
      loss = next_loss;
    }
    if (stalled) break;
  }

  // Exact fit through the p observations closest to the current hyperplane.
  {
    const Vector res = y - X * beta;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return std::abs(res[a]) < std::abs(res[b]); });
    Matrix basis(p, p);
    Vector target(p);
    Eigen::Index filled = 0;
    for (auto idx : order) {
      basis.row(filled) = X.row(idx);
      target[filled] = y[idx];
      Eigen::FullPivLU<Matrix> lu(basis.topRows(filled + 1));
      if (lu.rank() == filled + 1) ++filled;
      if (filled == p) break;
    }
    if (filled == p) {
      const Vector exact = basis.fullPivLu().solve(target);
      const double exact_loss = loss_of(exact);
      if (exact.allFinite() && exact_loss <= loss) {
        beta = exact;
        loss = exact_loss;
      }
    }
  }

  std::vector<double> w(static_cast<std::size_t>(n));
  std::vector<double> x(static_cast<std::size_t>(n));
  const double inf = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < 200; ++sweep) {
    const double before = loss;
    for (Eigen::Index j = 0; j < p; ++j) {
      const Vector partial = y - X * beta + X.col(j) * beta[j];
      for (Eigen::Index i = 0; i < n; ++i) {
        w[i] = partial[i];
        x[i] = X(i, j);
      }
      const double next = solve_line_qr(w, x, tau, -inf, inf, beta[j]);
      const double old = beta[j];
      beta[j] = next;
      const double next_loss = loss_of(beta);
      if (next_loss <= loss) {
        loss = next_loss;
      } else {
        beta[j] = old;
      }
    }
    if (before - loss <= tol * std::max(before, 1e-300)) break;
  }
  return beta;
}

}  // namespace tailfactor
