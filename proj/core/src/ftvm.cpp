#include "tailfactor/ftvm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include <Eigen/SVD>

#include "tailfactor/check_loss.hpp"
#include "tailfactor/error.hpp"
#include "tailfactor/line_solvers.hpp"
#include "tailfactor/parallel.hpp"
#include "tailfactor/rng.hpp"

namespace tailfactor {
namespace {

constexpr double kLowerMargin = 1e-9;
constexpr double kUpperShrink = 1e-10;

// Top right singular vectors of the row-centred exceedance indicators,
// scaled to unit mean square. Column j of the result is direction j.
Matrix exceedance_directions(const Matrix& scaled, int count) {
  const auto N = scaled.rows();
  const auto T = scaled.cols();
  Matrix ind(N, T);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index t = 0; t < T; ++t) ind(i, t) = scaled(i, t) > 1.0 ? 1.0 : 0.0;
  }
  ind.colwise() -= ind.rowwise().mean();
  Matrix dirs = Matrix::Zero(T, count);
  if (count == 0) return dirs;
  Eigen::BDCSVD<Matrix> svd(ind, Eigen::ComputeThinV);
  const Matrix& V = svd.matrixV();
  const double root_t = std::sqrt(static_cast<double>(T));
  for (int j = 0; j < count; ++j) {
    if (j < V.cols() && svd.singularValues()[j] > 1e-12) {
      dirs.col(j) = root_t * V.col(j);
    } else {
      // No signal left in the indicators: fall back to a fixed cosine.
      for (Eigen::Index t = 0; t < T; ++t) {
        dirs(t, j) = std::sqrt(2.0) * std::cos(M_PI * (j + 1) * (t + 0.5) / static_cast<double>(T));
      }
    }
  }
  return dirs;
}

struct Bounds {
  double lo;
  double hi;
};

struct RunOutcome {
  FactorModel model;
  std::vector<double> trace;
  double loss = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

// One-factor escape move. Cells whose residual or bound is tight link unit
// i to time t; cutting an edge of a spanning forest of those links splits
// the nodes, and scaling one side's loadings by a and its factors by 1/a
// keeps every tight link inside that side fixed while the cross cells move.
// The best such rescaling over all cuts is applied if it lowers the loss.
class Rescaler {
 public:
  Rescaler(const Matrix& Z, double tau, Bounds b) : Z_(Z), tau_(tau), b_(b) {}

  bool improve(Matrix& L, Matrix& F) {
    const auto N = Z_.rows();
    const auto T = Z_.cols();
    if ((L.row(0).array() <= 0.0).any() || (F.row(0).array() <= 0.0).any()) return false;
    const auto nodes = static_cast<std::size_t>(N + T);
    std::vector<std::size_t> parent(nodes);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::vector<std::vector<std::size_t>> adj(nodes);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (Eigen::Index i = 0; i < N; ++i) {
      for (Eigen::Index t = 0; t < T; ++t) {
        const double g = L(0, i) * F(0, t);
        const double z = Z_(i, t);
        const bool tight = std::abs(z - g) <= 1e-9 * std::max(1.0, std::abs(z)) || std::abs(g - b_.lo) <= 1e-9 ||
                           std::abs(g - b_.hi) <= 1e-9 * b_.hi;
        if (!tight) continue;
        const auto u = static_cast<std::size_t>(i);
        const auto v = static_cast<std::size_t>(N + t);
        const auto ru = find(u);
        const auto rv = find(v);
        if (ru == rv) continue;
        parent[ru] = rv;
        adj[u].push_back(v);
        adj[v].push_back(u);
        edges.emplace_back(u, v);
      }
    }
    std::vector<char> side(nodes);
    std::vector<std::size_t> stack;
    auto mark = [&](std::size_t from, std::size_t blocked) {
      std::fill(side.begin(), side.end(), 0);
      side[from] = 1;
      stack.assign(1, from);
      while (!stack.empty()) {
        const auto x = stack.back();
        stack.pop_back();
        for (auto y : adj[x]) {
          if (side[y] || (x == from && y == blocked)) continue;
          side[y] = 1;
          stack.push_back(y);
        }
      }
    };
    double best_gain = 0.0;
    double best_alpha = 1.0;
    std::vector<char> best_side;
    auto consider = [&]() {
      // Scaling either side is the same move up to the gauge; use the smaller.
      const auto count = static_cast<std::size_t>(std::count(side.begin(), side.end(), 1));
      if (2 * count > nodes) {
        for (auto& x : side) x = static_cast<char>(!x);
      }
      double alpha = 1.0;
      const double gain = best_scale(L, F, side, alpha);
      if (gain > best_gain) {
        best_gain = gain;
        best_alpha = alpha;
        best_side = side;
      }
    };
    for (const auto& [u, v] : edges) {
      mark(u, v);
      consider();
    }
    // Whole components of a disconnected forest can also be rescaled.
    std::vector<char> seen(nodes, 0);
    std::size_t roots = 0;
    for (std::size_t x = 0; x < nodes; ++x) roots += find(x) == x ? 1 : 0;
    if (roots > 1) {
      for (std::size_t x = 0; x < nodes; ++x) {
        if (seen[find(x)]) continue;
        seen[find(x)] = 1;
        mark(x, nodes);
        consider();
      }
    }
    if (best_side.empty()) return false;
    for (Eigen::Index i = 0; i < N; ++i) {
      if (best_side[static_cast<std::size_t>(i)]) L(0, i) *= best_alpha;
    }
    for (Eigen::Index t = 0; t < T; ++t) {
      if (best_side[static_cast<std::size_t>(N + t)]) F(0, t) /= best_alpha;
    }
    return true;
  }

 private:
  // Minimises over alpha the loss of the cross cells: those scaled by alpha
  // (unit inside, time outside) and those scaled by 1/alpha. Between
  // breakpoints the loss is c0 + c1 alpha + c2 / alpha. Returns the gain.
  double best_scale(const Matrix& L, const Matrix& F, const std::vector<char>& side, double& alpha_out) {
    const auto N = Z_.rows();
    const auto T = Z_.cols();
    units_.clear();
    times_.clear();
    for (Eigen::Index i = 0; i < N; ++i) {
      if (side[static_cast<std::size_t>(i)]) units_.push_back(i);
    }
    for (Eigen::Index t = 0; t < T; ++t) {
      if (side[static_cast<std::size_t>(N + t)]) times_.push_back(t);
    }
    double a_lo = 0.0;
    double a_hi = std::numeric_limits<double>::infinity();
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
    double current = 0.0;
    points_.clear();
    auto scaled_up = [&](Eigen::Index i, Eigen::Index t) {
      // z - g alpha: positive residual below z / g.
      const double g = L(0, i) * F(0, t);
      const double z = Z_(i, t);
      current += check_loss_unchecked(z - g, tau_);
      a_lo = std::max(a_lo, b_.lo / g);
      a_hi = std::min(a_hi, b_.hi / g);
      if (z > 0.0) {
        c0 += (1.0 - tau_) * z;
        c1 -= (1.0 - tau_) * g;
        points_.push_back({z / g, -z, g, 0.0});
      } else {
        c0 -= tau_ * z;
        c1 += tau_ * g;
      }
    };
    auto scaled_down = [&](Eigen::Index i, Eigen::Index t) {
      // z - g / alpha: negative residual below g / z.
      const double g = L(0, i) * F(0, t);
      const double z = Z_(i, t);
      current += check_loss_unchecked(z - g, tau_);
      a_lo = std::max(a_lo, g / b_.hi);
      a_hi = std::min(a_hi, g / b_.lo);
      c0 -= tau_ * z;
      c2 += tau_ * g;
      if (z > 0.0) points_.push_back({g / z, z, 0.0, -g});
    };
    for (auto i : units_) {
      for (Eigen::Index t = 0; t < T; ++t) {
        if (!side[static_cast<std::size_t>(N + t)]) scaled_up(i, t);
      }
    }
    for (auto t : times_) {
      for (Eigen::Index i = 0; i < N; ++i) {
        if (!side[static_cast<std::size_t>(i)]) scaled_down(i, t);
      }
    }
    if (points_.empty() && c1 == 0.0 && c2 == 0.0) return 0.0;
    a_lo = std::min(a_lo, 1.0);
    a_hi = std::max(a_hi, 1.0);
    std::sort(points_.begin(), points_.end(), [](const Kink& x, const Kink& y) { return x.at < y.at; });
    double best = current;
    double best_alpha = 1.0;
    auto eval = [&](double a) {
      if (!(a >= a_lo && a <= a_hi)) return;
      const double v = c0 + c1 * a + c2 / a;
      if (v < best) {
        best = v;
        best_alpha = a;
      }
    };
    auto segment = [&](double from, double to) {
      from = std::max(from, a_lo);
      to = std::min(to, a_hi);
      if (from > to) return;
      eval(from);
      eval(to);
      if (c1 > 0.0 && c2 > 0.0) {
        const double s = std::sqrt(c2 / c1);
        if (s > from && s < to) eval(s);
      }
    };
    double prev = a_lo;
    std::size_t j = 0;
    while (j < points_.size() && points_[j].at <= a_lo) {
      c0 += points_[j].d0;
      c1 += points_[j].d1;
      c2 += points_[j].d2;
      ++j;
    }
    for (; j < points_.size() && points_[j].at < a_hi; ++j) {
      segment(prev, points_[j].at);
      prev = points_[j].at;
      c0 += points_[j].d0;
      c1 += points_[j].d1;
      c2 += points_[j].d2;
    }
    segment(prev, a_hi);
    alpha_out = best_alpha;
    const double gain = current - best;
    return gain > 1e-12 * std::max(1.0, current) ? gain : 0.0;
  }

  struct Kink {
    double at;
    double d0;
    double d1;
    double d2;
  };
  const Matrix& Z_;
  double tau_;
  Bounds b_;
  std::vector<Kink> points_;
  std::vector<Eigen::Index> units_;
  std::vector<Eigen::Index> times_;
};

RunOutcome alternate(const Matrix& Z, FactorModel start, double tau, Bounds b, const FitOptions& opts) {
  const auto N = Z.rows();
  const auto T = Z.cols();
  const int r = start.r();
  VectorQrOptions qr_opts;
  qr_opts.grid = opts.inner_grid;
  if (r == 1) qr_opts.max_cycles = 1;
  RunOutcome out;
  out.model = std::move(start);
  Matrix& L = out.model.loadings;
  Matrix& F = out.model.factors;
  const Matrix Zt = Z.transpose();
  double loss = ftvm_objective(Z, out.model, tau);
  out.trace.push_back(loss);
  Rescaler rescaler(Z, tau, b);
  constexpr int kMaxEscapes = 50;
  constexpr double kEscapeMinGain = 1e-4;
  int escapes = 0;
  for (int iter = 0; iter < opts.max_outer_iters; ++iter) {
    const double before = loss;
    parallel_for(static_cast<std::size_t>(N), opts.threads, [&](std::size_t i) {
      const auto row = Zt.col(static_cast<Eigen::Index>(i));
      const Vector v0 = L.col(static_cast<Eigen::Index>(i));
      L.col(static_cast<Eigen::Index>(i)) =
          solve_vector_qr({row.data(), static_cast<std::size_t>(T)}, F, tau, b.lo, b.hi, v0, qr_opts);
    });
    loss = ftvm_objective(Z, out.model, tau);
    out.trace.push_back(loss);
    parallel_for(static_cast<std::size_t>(T), opts.threads, [&](std::size_t t) {
      const auto col = Z.col(static_cast<Eigen::Index>(t));
      const Vector v0 = F.col(static_cast<Eigen::Index>(t));
      F.col(static_cast<Eigen::Index>(t)) =
          solve_vector_qr({col.data(), static_cast<std::size_t>(N)}, L, tau, b.lo, b.hi, v0, qr_opts);
    });
    loss = ftvm_objective(Z, out.model, tau);
    out.trace.push_back(loss);
    out.iterations = iter + 1;
    if (before - loss > opts.loss_rel_tol * std::max(before, std::numeric_limits<double>::min())) continue;
    if (r != 1 || escapes >= kMaxEscapes) break;
    const FactorModel kept = out.model;
    if (!rescaler.improve(L, F)) break;
    const double moved = ftvm_objective(Z, out.model, tau);
    // Escapes that gain less than this share of the loss do not pay for
    // another round of alternation.
    if (!(moved < loss * (1.0 - kEscapeMinGain))) {
      out.model = kept;
      break;
    }
    ++escapes;
    loss = moved;
    out.trace.push_back(loss);
  }
  out.loss = loss;
  return out;
}

void require_feasible(const Matrix& surface, double m, double M) {
  std::ostringstream cells;
  int bad = 0;
  for (Eigen::Index i = 0; i < surface.rows(); ++i) {
    for (Eigen::Index t = 0; t < surface.cols(); ++t) {
      const double s = surface(i, t);
      if (!(s > m && s <= M)) {
        if (bad < 5) cells << (bad ? ", " : "") << "(" << i << "," << t << ")=" << s;
        ++bad;
      }
    }
  }
  if (bad > 0) {
    throw InfeasibleError("fitted surface violates m < l'f <= M at " + std::to_string(bad) +
                          " cell(s): " + cells.str());
  }
}

}  // namespace

Matrix FactorModel::surface(Eigen::Index n_units, Eigen::Index n_times) const {
  if (factors.rows() == 0) return Matrix::Ones(n_units, n_times);
  return loadings.transpose() * factors;
}

double ftvm_objective(const Matrix& scaled, const FactorModel& model, double tau) {
  return check_loss_sum(scaled, model.surface(scaled.rows(), scaled.cols()), tau);
}

std::pair<FactorModel, Matrix> normalize_identification(const FactorModel& model) {
  const auto r = model.factors.rows();
  const auto T = model.factors.cols();
  const auto N = model.loadings.cols();
  if (model.loadings.rows() != r) throw ArgumentError("normalize_identification: L and F differ in r");
  if (r == 0) return {model, Matrix(0, 0)};
  const Matrix sigma_f = model.factors * model.factors.transpose() / static_cast<double>(T);
  Eigen::SelfAdjointEigenSolver<Matrix> check(sigma_f);
  const double largest = check.eigenvalues().maxCoeff();
  if (!(check.eigenvalues().minCoeff() > 1e-12 * std::max(largest, 1.0))) {
    throw RankError("normalize_identification: F F'/T is singular; reduce r");
  }
  Eigen::LLT<Matrix> llt(sigma_f);
  if (llt.info() != Eigen::Success) throw RankError("normalize_identification: F F'/T is not positive definite");
  const Matrix R = llt.matrixL();
  const Matrix F1 = R.triangularView<Eigen::Lower>().solve(model.factors);
  const Matrix L1 = R.transpose() * model.loadings;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(L1 * L1.transpose() / static_cast<double>(N));
  Matrix Q = eig.eigenvectors().rowwise().reverse();  // descending eigenvalues
  FactorModel out{Q.transpose() * L1, Q.transpose() * F1};
  Matrix S = Matrix::Identity(r, r);
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index t = 0; t < T; ++t) {
      const double v = out.factors(j, t);
      if (v != 0.0) {
        if (v < 0.0) {
          S(j, j) = -1.0;
          out.factors.row(j) *= -1.0;
          out.loadings.row(j) *= -1.0;
        }
        break;
      }
    }
  }
  return {std::move(out), std::move(S)};
}

FitResult fit_ftvm(const PanelData& panel, int r, const TailConfig& cfg, const FitOptions& opts,
                   const FactorModel* warm_start) {
  cfg.validate(panel.n_cells());
  opts.validate();
  const auto N = static_cast<Eigen::Index>(panel.n_units());
  const auto T = static_cast<Eigen::Index>(panel.n_times());
  if (r < 1 || r > std::min(N, T)) {
    throw ArgumentError("fit_ftvm: r must satisfy 1 <= r <= min(N, T), got r=" + std::to_string(r));
  }
  FitResult result;
  result.tail = estimate_tail(panel.pooled(), cfg.k, false);
  const double u = result.tail.u_intermediate;
  if (!(u > 0.0)) {
    throw DomainError("fit_ftvm: the k-th largest observation " + std::to_string(u) +
                      " is not positive; the panel cannot be scaled");
  }
  result.tau = static_cast<double>(cfg.k) / static_cast<double>(panel.n_cells());
  result.lower = cfg.lower;
  result.upper = cfg.upper;
  const double tau = result.tau;
  const Matrix Z = panel.values() / u;
  const Bounds b{cfg.lower + kLowerMargin, cfg.upper * (1.0 - kUpperShrink)};
  if (b.lo > b.hi) {
    throw InfeasibleError("fit_ftvm: bounds leave no room after the strict lower margin");
  }

  const Matrix dirs = exceedance_directions(Z, r);
  auto base_start = [&]() {
    FactorModel start{Matrix::Zero(r, N), Matrix::Zero(r, T)};
    start.loadings.row(0).setOnes();
    start.factors.row(0).setConstant(std::clamp(1.0, b.lo, b.hi));
    for (int j = 1; j < r; ++j) start.factors.row(j) = dirs.col(j - 1).transpose();
    return start;
  };

  std::vector<FactorModel> starts;
  if (warm_start != nullptr) {
    const int wr = warm_start->r();
    if (warm_start->loadings.cols() != N || warm_start->factors.cols() != T || (wr != r && wr != r - 1)) {
      throw ArgumentError("fit_ftvm: warm start must have r or r-1 factors of matching shape");
    }
    FactorModel padded{Matrix::Zero(r, N), Matrix::Zero(r, T)};
    padded.loadings.topRows(wr) = warm_start->loadings;
    padded.factors.topRows(wr) = warm_start->factors;
    if (wr == r - 1) {
      // New direction: exceedance signal orthogonalised against the old factors.
      Vector d = dirs.col(r - 1);
      if (wr > 0) {
        const Matrix Fw = warm_start->factors;
        d -= Fw.transpose() * (Fw * Fw.transpose()).ldlt().solve(Fw * d);
      }
      const double norm = d.norm();
      if (norm > 1e-10) d *= std::sqrt(static_cast<double>(T)) / norm;
      padded.factors.row(r - 1) = d.transpose();
    }
    require_feasible(padded.surface(N, T), b.lo - 1e-11, b.hi + 1e-11);
    starts.push_back(std::move(padded));
  }
  for (int s = 0; s < opts.n_restarts; ++s) {
    FactorModel start = base_start();
    if (s > 0) {
      RandomStream rng(derive_seed(opts.seed, static_cast<std::uint64_t>(s)), 0);
      for (Eigen::Index t = 0; t < T; ++t) {
        start.factors(0, t) = std::clamp(std::exp(0.3 * rng.normal()), b.lo, b.hi);
        for (int j = 1; j < r; ++j) start.factors(j, t) += 0.5 * rng.normal();
      }
    }
    starts.push_back(std::move(start));
  }

  RunOutcome best;
  for (auto& start : starts) {
    RunOutcome run = alternate(Z, std::move(start), tau, b, opts);
    if (run.loss < best.loss) best = std::move(run);
  }
  result.restarts_used = static_cast<int>(starts.size());
  result.iterations = best.iterations;
  result.loss_trace = std::move(best.trace);
  result.model = normalize_identification(best.model).first;
  const Matrix surface = result.model.surface(N, T);
  require_feasible(surface, cfg.lower, cfg.upper);
  result.final_loss = check_loss_sum(Z, surface, tau);
  return result;
}

Matrix predict_quantiles(const FitResult& fit, const QuantileLevel& level) {
  const auto N = fit.model.loadings.cols();
  const auto T = fit.model.factors.cols();
  Matrix out = fit.model.surface(N, T) * fit.tail.u_intermediate;
  if (level.p) {
    if (!fit.tail.gamma_hat) {
      throw DomainError("predict_quantiles: no Hill estimate available for extrapolation");
    }
    out *= weissman_extrapolate(1.0, *fit.tail.gamma_hat, fit.tail.k, fit.tail.n, *level.p);
  }
  return out;
}

}  // namespace tailfactor
