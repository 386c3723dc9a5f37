#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "tailfactor/error.hpp"
#include "tailfactor/result_io.hpp"

using namespace tailfactor;

namespace {

Matrix pareto_panel(Eigen::Index N, Eigen::Index T, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix y(N, T);
  for (Eigen::Index j = 0; j < y.size(); ++j) y.data()[j] = std::pow(u(gen), -0.5);
  return y;
}

}  // namespace

TEST(ResultIo, FitRoundTripIsExact) {
  TailConfig cfg;
  cfg.k = 20;
  FitOptions opts;
  opts.n_restarts = 1;
  const auto fit = fit_ftvm(PanelData(pareto_panel(10, 12, 1)), 2, cfg, opts);
  std::stringstream buf;
  save_result(fit, buf);
  EXPECT_NE(buf.str().find("\"u_intermediate\""), std::string::npos);
  EXPECT_NE(buf.str().find("\"schema_version\""), std::string::npos);
  const auto back = load_fit_result(buf);
  EXPECT_EQ(back.model.loadings, fit.model.loadings);
  EXPECT_EQ(back.model.factors, fit.model.factors);
  EXPECT_EQ(back.loss_trace, fit.loss_trace);
  EXPECT_EQ(back.final_loss, fit.final_loss);
  EXPECT_EQ(back.tail.u_intermediate, fit.tail.u_intermediate);
  EXPECT_EQ(back.tail.gamma_hat, fit.tail.gamma_hat);
  EXPECT_EQ(back.restarts_used, fit.restarts_used);
}

TEST(ResultIo, EotRoundTrip) {
  TailConfig cfg;
  cfg.k = 15;
  cfg.extreme_level = 1e-3;
  FitOptions opts;
  opts.n_restarts = 1;
  EotOverrides ov;
  ov.force_r = 1;
  const auto eot =
      run_eot(PanelData(pareto_panel(10, 10, 2)), nullptr, {ThresholdKind::constant, 1}, cfg, 0.05, opts, ov);
  std::stringstream buf;
  save_result(eot, buf);
  const auto back = load_eot_result(buf);
  EXPECT_EQ(back.intermediate_surface, eot.intermediate_surface);
  EXPECT_EQ(back.extreme_surface, eot.extreme_surface);
  EXPECT_EQ(back.r_selected, 1);
  EXPECT_EQ(back.u_adj, eot.u_adj);
  EXPECT_EQ(back.threshold_model.kind, ThresholdKind::constant);
}

TEST(ResultIo, FailedStreamRaisesIoError) {
  FitResult fit;
  fit.model = FactorModel{Matrix::Ones(1, 2), Matrix::Ones(1, 2)};
  std::ofstream closed;
  EXPECT_THROW(save_result(fit, closed), IoError);
}

TEST(ResultIo, RejectsWrongKindAndGarbage) {
  std::istringstream garbage("not json");
  EXPECT_THROW(load_fit_result(garbage), DataError);
  TailEstimates t{2.0, 0.5, 10, 100};
  std::istringstream other(to_json(t));
  EXPECT_THROW(load_fit_result(other), DataError);
}

TEST(ResultIo, AtomicWriteReplacesFile) {
  const auto dir = std::filesystem::temp_directory_path() / "tailfactor_io_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "out.json").string();
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(content, "second");
  EXPECT_THROW(write_file_atomic((dir / "missing" / "x.json").string(), "x"), IoError);
  std::filesystem::remove_all(dir);
}
