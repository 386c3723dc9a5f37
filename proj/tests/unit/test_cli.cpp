// Runs the tailfactor executable as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tailfactor_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  Result run(const std::string& args) const {
    const std::string cmd = std::string("TAILFACTOR_THREADS=1 '") + TAILFACTOR_CLI_PATH + "' " + args + " >'" +
                            path("stdout").string() + "' 2>'" + path("stderr").string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(path("stdout"));
    r.err = slurp(path("stderr"));
    return r;
  }

  // 10 x 10 DGP1 panel.
  std::string simulate_panel(const std::string& name = "panel.csv") const {
    const auto p = path(name).string();
    const auto r = run("simulate --dgp 1 --N 10 --T 10 --lambda 2 --seed 7 -o '" + p + "'");
    EXPECT_EQ(r.code, 0) << r.err;
    return p;
  }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

 private:
  fs::path dir_;
};

TEST_F(Cli, SimulateIsByteIdentical) {
  const auto a = run("simulate --dgp 1 --N 10 --T 10 --lambda 2 --seed 7");
  const auto b = run("simulate --dgp 1 --N 10 --T 10 --lambda 2 --seed 7");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_FALSE(a.out.empty());
  EXPECT_EQ(a.out, b.out);
  const auto c = run("simulate --dgp 1 --N 10 --T 10 --lambda 2 --seed 8");
  EXPECT_NE(a.out, c.out);
}

TEST_F(Cli, SimulateWritesTruthAndCovariates) {
  const auto r = run("simulate --dgp 5 --N 6 --T 8 --lambda 2 --seed 3 -o '" + path("p.json").string() +
                     "' --truth '" + path("truth.json").string() + "' --covariates-out '" +
                     path("cov.csv").string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(path("p.json")).find("\"values\""), std::string::npos);
  EXPECT_NE(slurp(path("truth.json")).find("\"coefficients\""), std::string::npos);
  EXPECT_EQ(slurp(path("cov.csv")).rfind("unit,time,", 0), 0u);
}

TEST_F(Cli, FitWritesResult) {
  const auto panel = simulate_panel();
  const auto r = run("fit --r 1 --k 10 --restarts 1 '" + panel + "' -o '" + path("fit.json").string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = slurp(path("fit.json"));
  EXPECT_NE(text.find("\"fit_result\""), std::string::npos);
  EXPECT_NE(text.find("\"loadings\""), std::string::npos);
}

TEST_F(Cli, FitWithUpperBelowLowerExitsTwoNamingBoth) {
  const auto panel = simulate_panel();
  const auto r = run("fit --r 1 --k 10 --m 0.5 --M 0.4 '" + panel + "' -o '" + path("fit.json").string() + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("M=0.4"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("m=0.5"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("fit.json")));
}

TEST_F(Cli, UsageErrorsExitTwo) {
  const auto panel = simulate_panel();
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("fit --r 1 '" + panel + "'").code, 2);                        // no k
  EXPECT_EQ(run("fit --r 1 --k 10 --k-frac 0.1 '" + panel + "'").code, 2);   // both
  EXPECT_EQ(run("fit --r 1 --k notanumber '" + panel + "'").code, 2);
  EXPECT_EQ(run("validate --k 10 --alpha 0.2 '" + panel + "'").code, 2);
  EXPECT_EQ(run("fit --bogus 1").code, 2);
}

TEST_F(Cli, MalformedPanelExitsThree) {
  write("bad.csv", "unit,t1,t2\nu1,1.0,abc\nu2,2.0,3.0\n");
  EXPECT_EQ(run("evt --k 2 '" + path("bad.csv").string() + "'").code, 3);
  EXPECT_EQ(run("evt --k 2 '" + path("missing.csv").string() + "'").code, 3);
}

TEST_F(Cli, EotWithTooFewPositiveExcessesExitsFour) {
  const auto panel = simulate_panel();
  const auto r = run("eot --threshold constant --k 60 '" + panel + "' -o '" + path("eot.json").string() + "'");
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_FALSE(fs::exists(path("eot.json")));
}

TEST_F(Cli, EotWritesResult) {
  const auto panel = simulate_panel();
  const auto r = run("eot --threshold constant --k 10 --p 0.01 --restarts 1 '" + panel + "' -o '" +
                     path("eot.json").string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(path("eot.json")).find("\"eot_result\""), std::string::npos);
}

TEST_F(Cli, EvtValidateSelectPrintJson) {
  const auto panel = simulate_panel();
  const auto evt = run("evt --k-frac 0.1 --p 0.001 --hill-min 2 --hill-max 20 '" + panel + "'");
  ASSERT_EQ(evt.code, 0) << evt.err;
  EXPECT_NE(evt.out.find("\"gamma_hat\""), std::string::npos);
  EXPECT_NE(evt.out.find("\"weissman_quantile\""), std::string::npos);
  EXPECT_NE(evt.out.find("\"hill_plot\""), std::string::npos);

  const auto ks = run("validate --k 10 --alpha 0.05 '" + panel + "'");
  ASSERT_EQ(ks.code, 0) << ks.err;
  EXPECT_NE(ks.out.find("\"p_value\""), std::string::npos);

  const auto ic = run("select --k 10 --rmax 2 --c 10 --restarts 1 '" + panel + "'");
  ASSERT_EQ(ic.code, 0) << ic.err;
  EXPECT_NE(ic.out.find("\"r_hat\""), std::string::npos);
}

TEST_F(Cli, ConfigFileFillsFlagsAndFlagsWin) {
  const auto panel = simulate_panel();
  write("cfg.json", R"({"k": 10, "p": 0.001})");
  const auto from_file = run("evt --config '" + path("cfg.json").string() + "' '" + panel + "'");
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  EXPECT_NE(from_file.out.find("\"k\": 10"), std::string::npos) << from_file.out;

  const auto overridden = run("evt --k 12 --config '" + path("cfg.json").string() + "' '" + panel + "'");
  ASSERT_EQ(overridden.code, 0) << overridden.err;
  EXPECT_NE(overridden.out.find("\"k\": 12"), std::string::npos) << overridden.out;
}

TEST_F(Cli, ConfigFileRejectsUnknownKeys) {
  const auto panel = simulate_panel();
  write("cfg.json", R"({"k": 10, "kk": 3})");
  const auto r = run("evt --config '" + path("cfg.json").string() + "' '" + panel + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("kk"), std::string::npos);
}

TEST_F(Cli, HelpListsDefaults) {
  const auto fit = run("fit --help");
  EXPECT_EQ(fit.code, 0);
  EXPECT_NE(fit.out.find("1.6"), std::string::npos);
  EXPECT_NE(fit.out.find("0.1"), std::string::npos);

  const auto eot = run("eot --help");
  EXPECT_EQ(eot.code, 0);
  for (const char* d : {"1.6", "0.1", "10", "0.5", "0.05"}) EXPECT_NE(eot.out.find(d), std::string::npos) << d;

  for (const char* sub : {"evt", "validate", "select", "simulate", "bench"}) {
    const auto r = run(std::string(sub) + " --help");
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
}

TEST_F(Cli, BenchRunsSmallExperiment) {
  write("exp.json", R"j({"dgp": 1, "N": 10, "T": 10, "lambda": 2, "seed": 1, "reps": 2, "k_frac": 0.1,
                        "models": ["degenerate", "ftvm(1)"], "restarts": 1, "reference_reps": 5})j");
  const auto r = run("bench --config '" + path("exp.json").string() + "' -o '" + path("report.json").string() +
                     "' --table '" + path("report.txt").string() + "' -q");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(path("report.json")).find("ftvm(1)"), std::string::npos);
  EXPECT_NE(slurp(path("report.txt")).find("degenerate"), std::string::npos);

  write("bad.json", R"({"dgp": 1, "unknown_key": 2})");
  EXPECT_EQ(run("bench --config '" + path("bad.json").string() + "'").code, 2);
}

}  // namespace
