#include "tailfactor/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "tailfactor/check_loss.hpp"
#include "tailfactor/error.hpp"
#include "tailfactor/rng.hpp"

namespace tailfactor {
namespace {

constexpr int kBurnIn = 200;

RandomStream stream(const DgpSpec& spec, DgpStream id) {
  return RandomStream(spec.seed, static_cast<std::uint64_t>(id));
}

// AR(1)-type recursion x_t = phi x_{t-1} + shift + innovation started at the
// stationary mean and burned in.
template <class Draw>
Vector ar_path(std::size_t T, double phi, double shift, double innovation_mean, Draw&& draw) {
  double x = (shift + innovation_mean) / (1.0 - phi);
  for (int b = 0; b < kBurnIn; ++b) x = phi * x + draw() + shift;
  Vector out(static_cast<Eigen::Index>(T));
  for (std::size_t t = 0; t < T; ++t) {
    x = phi * x + draw() + shift;
    out[static_cast<Eigen::Index>(t)] = x;
  }
  return out;
}

// DGP1 loadings and factors (also used by DGP4 and DGP5).
std::pair<Matrix, Matrix> dgp1_components(const DgpSpec& spec) {
  auto ls = stream(spec, DgpStream::loadings);
  auto fs = stream(spec, DgpStream::factors);
  Matrix L(1, static_cast<Eigen::Index>(spec.N));
  for (std::size_t i = 0; i < spec.N; ++i) L(0, static_cast<Eigen::Index>(i)) = 0.5 + ls.beta(1.0, 1.0);
  Matrix F(1, static_cast<Eigen::Index>(spec.T));
  F.row(0) = ar_path(spec.T, 0.4, 0.3, 0.5, [&] { return fs.beta(1.0, 1.0); }).transpose();
  return {L, F};
}

std::pair<Matrix, Matrix> dgp2_components(const DgpSpec& spec) {
  auto ls = stream(spec, DgpStream::loadings);
  auto fs = stream(spec, DgpStream::factors);
  Matrix L(2, static_cast<Eigen::Index>(spec.N));
  for (std::size_t i = 0; i < spec.N; ++i) {
    for (int j = 0; j < 2; ++j) L(j, static_cast<Eigen::Index>(i)) = 0.5 + ls.beta(0.5, 0.5);
  }
  const double phi[2] = {0.4, 0.2};
  const double shift[2] = {0.3, 0.4};
  Vector x(2);
  for (int j = 0; j < 2; ++j) x[j] = (shift[j] + 0.5) / (1.0 - phi[j]);
  Matrix F(2, static_cast<Eigen::Index>(spec.T));
  for (int step = -kBurnIn; step < static_cast<int>(spec.T); ++step) {
    for (int j = 0; j < 2; ++j) x[j] = phi[j] * x[j] + fs.beta(0.5, 0.5) + shift[j];
    if (step >= 0) F.col(step) = x;
  }
  return {L, F};
}

std::pair<Matrix, Matrix> dgp3_components(const DgpSpec& spec) {
  auto ls = stream(spec, DgpStream::loadings);
  auto fs = stream(spec, DgpStream::factors);
  const auto N = static_cast<Eigen::Index>(spec.N);
  const auto T = static_cast<Eigen::Index>(spec.T);
  Matrix E(2, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (int j = 0; j < 2; ++j) E(j, i) = ls.beta(0.5, 0.5);
  }
  Matrix Ep(2, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int j = 0; j < 2; ++j) Ep(j, t) = fs.beta(0.5, 0.5);
  }
  // 0.5 + E'E' = X Y' with X = [sqrt(.5) 1, E'] and Y = [sqrt(.5) 1, Ep'];
  // its SVD follows from thin QR factors of X and Y and a 3 x 3 core.
  Matrix X(N, 3);
  Matrix Y(T, 3);
  X.col(0).setConstant(std::sqrt(0.5));
  Y.col(0).setConstant(std::sqrt(0.5));
  X.rightCols(2) = E.transpose();
  Y.rightCols(2) = Ep.transpose();
  Eigen::HouseholderQR<Matrix> qx(X);
  Eigen::HouseholderQR<Matrix> qy(Y);
  const Matrix Qx = qx.householderQ() * Matrix::Identity(N, 3);
  const Matrix Qy = qy.householderQ() * Matrix::Identity(T, 3);
  const Matrix Rx = qx.matrixQR().topRows(3).triangularView<Eigen::Upper>();
  const Matrix Ry = qy.matrixQR().topRows(3).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Matrix> core(Rx * Ry.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix V = (Qx * core.matrixU().leftCols(2)).transpose();  // 2 x N
  Matrix W = (Qy * core.matrixV().leftCols(2)).transpose();  // 2 x T
  // Positive leading singular vectors; the second pair flips together.
  for (int j = 0; j < 2; ++j) {
    const double s = j == 0 ? (V.row(0).sum() < 0 ? -1.0 : 1.0) : (V(1, 0) < 0 ? -1.0 : 1.0);
    V.row(j) *= s;
    W.row(j) *= s;
  }
  const auto [s1, s2] = dgp3_lp(V, W);
  const double root_t = std::sqrt(static_cast<double>(T));
  Matrix L(2, N);
  L.row(0) = V.row(0) * (s1 / root_t);
  L.row(1) = V.row(1) * (s2 / root_t);
  return {L, root_t * W};
}

}  // namespace

void DgpSpec::validate() const {
  if (dgp < 1 || dgp > 5) throw ArgumentError("dgp must be 1..5, got " + std::to_string(dgp));
  if (N < 2 || T < 2) throw ArgumentError("simulation needs N >= 2 and T >= 2");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be positive");
}

std::pair<double, double> dgp3_lp(const Matrix& V, const Matrix& W) {
  if (V.rows() != 2 || W.rows() != 2) throw ArgumentError("dgp3_lp: V and W must have two rows");
  const auto N = V.cols();
  const auto T = W.cols();
  const std::size_t n = static_cast<std::size_t>(N * T);
  // Each cell gives s1 in [(0.1 - b s)/a, (5 - b s)/a] for s = s2.
  std::vector<double> inv_a(n);
  std::vector<double> ratio(n);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index t = 0; t < T; ++t) {
      const double a = V(0, i) * W(0, t);
      if (!(a > 0.0)) throw ArgumentError("dgp3_lp: leading products v_i1 w_t1 must be positive");
      const auto c = static_cast<std::size_t>(i * T + t);
      inv_a[c] = 1.0 / a;
      ratio[c] = V(1, i) * W(1, t) / a;
    }
  }
  struct Envelope {
    double lo;
    double hi;
    std::size_t lo_arg;  // n means the s1 >= s line
    std::size_t hi_arg;
  };
  auto envelope = [&](double s) {
    Envelope e{s, std::numeric_limits<double>::infinity(), n, n};
    for (std::size_t c = 0; c < n; ++c) {
      const double lo = 0.1 * inv_a[c] - ratio[c] * s;
      const double hi = 5.0 * inv_a[c] - ratio[c] * s;
      if (lo > e.lo) {
        e.lo = lo;
        e.lo_arg = c;
      }
      if (hi < e.hi) {
        e.hi = hi;
        e.hi_arg = c;
      }
    }
    return e;
  };
  auto line = [&](std::size_t c, bool upper) -> std::pair<double, double> {
    if (c == n) return {0.0, 1.0};  // s1 = s
    return {(upper ? 5.0 : 0.1) * inv_a[c], -ratio[c]};
  };

  const Envelope at0 = envelope(0.0);
  if (at0.lo > at0.hi) {
    std::ostringstream msg;
    msg << "dgp3_lp: infeasible even at sigma2 = 0; binding cells " << at0.lo_arg << " (lower) and "
        << at0.hi_arg << " (upper) need sigma1 in [" << at0.lo << ", " << at0.hi << "]";
    throw InfeasibleError(msg.str());
  }
  // g(s) = lo(s) - hi(s) is convex; feasible s form an interval containing 0.
  double good = 0.0;
  double bad = std::max(1.0, at0.hi);
  while (true) {
    const Envelope e = envelope(bad);
    if (e.lo > e.hi) break;
    good = bad;
    bad *= 2.0;
    if (bad > 1e300) throw InfeasibleError("dgp3_lp: unbounded objective");
  }
  for (int it = 0; it < 200 && bad - good > 1e-15 * std::max(1.0, bad); ++it) {
    const double mid = 0.5 * (good + bad);
    const Envelope e = envelope(mid);
    (e.lo <= e.hi ? good : bad) = mid;
  }
  // Exact vertex: intersect the lines binding just past the optimum.
  double best = good;
  const Envelope past = envelope(bad);
  const auto [la, lb] = line(past.lo_arg, false);
  const auto [ua, ub] = line(past.hi_arg, true);
  if (lb != ub) {
    const double s = (ua - la) / (lb - ub);
    if (s >= good && s <= bad) {
      const Envelope e = envelope(s);
      if (e.lo <= e.hi) best = s;
    }
  }
  const Envelope e = envelope(best);
  return {e.lo, best};
}

std::pair<Matrix, Matrix> generate_volatility(const DgpSpec& spec) {
  spec.validate();
  switch (spec.dgp) {
    case 2: return dgp2_components(spec);
    case 3: return dgp3_components(spec);
    default: return dgp1_components(spec);
  }
}

double power_mean(const Matrix& surface, double lambda) {
  return std::pow(surface.array().pow(lambda).mean(), 1.0 / lambda);
}

DgpSample generate(const DgpSpec& spec) {
  auto [L, F] = generate_volatility(spec);
  const auto N = static_cast<Eigen::Index>(spec.N);
  const auto T = static_cast<Eigen::Index>(spec.T);
  const Matrix sigma = L.transpose() * F;
  Matrix u(N, T);
  Matrix signs;
  Matrix values(N, T);
  std::optional<Matrix> location;
  std::optional<Covariates> covariates;
  Matrix coefficients;
  auto us = stream(spec, DgpStream::innovations);
  if (spec.dgp <= 3) {
    auto bs = stream(spec, DgpStream::signs);
    signs.resize(N, T);
    for (Eigen::Index i = 0; i < N; ++i) {
      for (Eigen::Index t = 0; t < T; ++t) {
        u(i, t) = us.pareto(spec.lambda);
        signs(i, t) = bs.rademacher();
        values(i, t) = sigma(i, t) * u(i, t) * signs(i, t);
      }
    }
  } else {
    for (Eigen::Index i = 0; i < N; ++i) {
      for (Eigen::Index t = 0; t < T; ++t) u(i, t) = us.student_t(spec.lambda);
    }
    Matrix loc(N, T);
    if (spec.dgp == 4) {
      auto as = stream(spec, DgpStream::unit_effects);
      auto ts = stream(spec, DgpStream::time_effects);
      Vector a(N);
      for (Eigen::Index i = 0; i < N; ++i) a[i] = as.normal(1.0, 1.0);
      const Vector b = ar_path(spec.T, 0.6, 0.0, 1.0, [&] { return ts.normal(1.0, 1.0); });
      loc = a * b.transpose();
    } else {
      auto xs = stream(spec, DgpStream::covariates);
      auto cs = stream(spec, DgpStream::coefficients);
      coefficients.resize(N, 2);
      for (Eigen::Index i = 0; i < N; ++i) {
        for (int j = 0; j < 2; ++j) coefficients(i, j) = -0.5 + cs.beta(1.0, 1.0);
      }
      Covariates cov;
      cov.names = {"x1", "x2"};
      cov.layers.assign(2, Matrix(N, T));
      for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index t = 0; t < T; ++t) {
          const double l = L(0, i);
          const double f = F(0, t);
          cov.layers[0](i, t) = xs.normal(1.0, 1.0) + 0.2 * f * f + 0.8 * l * l;
          cov.layers[1](i, t) = xs.normal(1.0, 1.0);
          loc(i, t) = cov.layers[0](i, t) * coefficients(i, 0) + cov.layers[1](i, t) * coefficients(i, 1);
        }
      }
      covariates = std::move(cov);
    }
    values = loc + (sigma.array() * u.array()).matrix();
    location = std::move(loc);
  }
  DgpSample sample{PanelData(std::move(values)), std::move(L), std::move(F), std::move(u), std::move(signs),
                   std::move(location), std::move(covariates), std::move(coefficients), 0.0};
  sample.c_sample = power_mean(sigma, spec.lambda);
  return sample;
}

ReferenceConstant reference_constant(const DgpSpec& spec, int reps) {
  spec.validate();
  if (reps < 1) throw ArgumentError("reference_constant: reps must be >= 1");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    DgpSpec s = spec;
    s.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(rep));
    const auto [L, F] = generate_volatility(s);
    const double c = power_mean(L.transpose() * F, spec.lambda);
    sum += c;
    sum_sq += c * c;
  }
  ReferenceConstant out;
  out.value = sum / reps;
  if (reps > 1) {
    const double var = std::max(0.0, (sum_sq - reps * out.value * out.value) / (reps - 1));
    out.std_error = std::sqrt(var / reps);
  }
  return out;
}

double innovation_quantile(int dgp, double lambda, double tau) {
  require_tail_level(tau, "tail level tau");
  if (dgp <= 3) {
    if (tau >= 0.5) throw ArgumentError("signed Pareto quantiles need tau < 0.5");
    return std::pow(2.0 * tau, -1.0 / lambda);
  }
  boost::math::students_t dist(lambda);
  return boost::math::quantile(boost::math::complement(dist, tau));
}

double reference_quantile(int dgp, double lambda, double c, double tau) {
  return c * innovation_quantile(dgp, lambda, tau);
}

Matrix true_quantile_surface(const DgpSample& sample, int dgp, double lambda, double tau) {
  Matrix q = sample.true_loadings.transpose() * sample.true_factors * innovation_quantile(dgp, lambda, tau);
  if (sample.true_threshold) q += *sample.true_threshold;
  return q;
}

}  // namespace tailfactor
