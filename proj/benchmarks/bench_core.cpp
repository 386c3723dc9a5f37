#include <benchmark/benchmark.h>

#include <vector>

#include "tailfactor/dgp.hpp"
#include "tailfactor/evt.hpp"
#include "tailfactor/ftvm.hpp"
#include "tailfactor/line_solvers.hpp"
#include "tailfactor/rng.hpp"
#include "tailfactor/selection.hpp"

namespace tf = tailfactor;

namespace {

std::vector<double> pareto_sample(std::size_t n, std::uint64_t seed) {
  tf::RandomStream s(seed, 0);
  std::vector<double> x(n);
  for (auto& v : x) v = s.pareto(2.0);
  return x;
}

void BM_SolveScaleQr(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto z = pareto_sample(n, 1);
  std::vector<double> f(n);
  tf::RandomStream s(2, 0);
  for (auto& v : f) v = 0.2 + s.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(tf::solve_scale_qr(z, f, 0.1, 0.1, 1.6));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SolveScaleQr)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

void BM_SolveVectorQr(benchmark::State& state) {
  const auto r = static_cast<Eigen::Index>(state.range(0));
  const Eigen::Index T = 200;
  const auto z = pareto_sample(static_cast<std::size_t>(T), 3);
  tf::Matrix F(r, T);
  tf::RandomStream s(4, 0);
  for (Eigen::Index t = 0; t < T; ++t) {
    F(0, t) = 1.0;
    for (Eigen::Index j = 1; j < r; ++j) F(j, t) = 0.2 * (s.uniform() - 0.5);
  }
  tf::Vector v0 = tf::Vector::Zero(r);
  v0(0) = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(tf::solve_vector_qr(z, F, 0.1, 0.1, 1.6, v0));
}
BENCHMARK(BM_SolveVectorQr)->DenseRange(2, 3);

void BM_KsStatistic(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const auto flat = pareto_sample(static_cast<std::size_t>(n * n), 5);
  const tf::Matrix y = Eigen::Map<const tf::Matrix>(flat.data(), n, n);
  const auto k = static_cast<std::size_t>(n * n / 10);
  for (auto _ : state) benchmark::DoNotOptimize(tf::ks_statistic(y, k));
}
BENCHMARK(BM_KsStatistic)->Arg(50)->Arg(100)->Arg(200);

void BM_Hill(benchmark::State& state) {
  const auto x = pareto_sample(static_cast<std::size_t>(state.range(0)), 6);
  for (auto _ : state) benchmark::DoNotOptimize(tf::hill(x, x.size() / 10));
}
BENCHMARK(BM_Hill)->Arg(10000)->Arg(100000);

void BM_Generate(benchmark::State& state) {
  const int dgp = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(tf::generate(tf::DgpSpec{dgp, 100, 100, 2.0, ++seed}));
}
BENCHMARK(BM_Generate)->DenseRange(1, 5)->Unit(benchmark::kMillisecond);

void BM_FitFtvm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const int r = static_cast<int>(state.range(1));
  const auto sample = tf::generate(tf::DgpSpec{r == 1 ? 1 : 3, n, n, r == 1 ? 2.0 : 3.0, 11});
  tf::TailConfig cfg;
  cfg.k = n * n / 10;
  tf::FitOptions opts;
  opts.n_restarts = 1;
  for (auto _ : state) benchmark::DoNotOptimize(tf::fit_ftvm(sample.panel, r, cfg, opts));
}
BENCHMARK(BM_FitFtvm)->Args({50, 1})->Args({100, 1})->Args({50, 2})->Args({100, 2})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
