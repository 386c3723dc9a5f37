#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tailfactor/config.hpp"
#include "tailfactor/dgp.hpp"
#include "tailfactor/threshold.hpp"

namespace tailfactor {

enum class ModelKind { degenerate, ftvm, qfm, qrife, eotm0, eotm1, select };

struct ModelSpec {
  ModelKind kind = ModelKind::degenerate;
  int r = 0;  ///< ftvm only

  /// "degenerate", "ftvm(2)", "qfm", "qrife", "eotm0", "eotm1", "select".
  std::string name() const;
  static ModelSpec parse(const std::string& name);
};

enum class LevelKind { intermediate, extreme };

struct ExperimentConfig {
  DgpSpec dgp;
  TailConfig cfg;                      ///< cfg.k is derived from k_frac when k_frac is set
  std::optional<double> k_frac;
  std::vector<ModelSpec> models;
  std::vector<LevelKind> levels{LevelKind::intermediate};
  int reps = 100;
  FitOptions fit;                      ///< fit.threads is forced to 1 inside replications
  double alpha = 0.05;
  int threads = 1;                     ///< replications run in parallel
  int reference_reps = 200;
  int qfm_tail_r = 2;                  ///< factor count of the direct tail QFM baseline
  int qfm_threshold_r = 1;

  /// Resolves k and validates every field.
  void finalize();
};

/// Reads the flat JSON map documented in docs/experiment_config.md;
/// unknown keys are rejected.
ExperimentConfig parse_experiment_config(std::istream& in);

struct Aggregate {
  std::size_t count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    ++count;
    sum += x;
    sum_sq += x * x;
  }
  double mean() const;
  /// sd / sqrt(count); 0 for fewer than two values.
  double std_error() const;
};

struct Failure {
  int rep = 0;
  std::string model;
  std::string cause;
};

struct ModelReport {
  std::string model;
  std::map<std::string, Aggregate> msre;  ///< keyed "intermediate" / "extreme"
  std::size_t failures = 0;
  double seconds = 0.0;
  // select only
  Aggregate rejection;  ///< KS rejection indicator
  Aggregate r_hat;      ///< IC choice, computed on every replication
  Aggregate correct;    ///< indicator r_hat == true r
};

struct ReplicationRecord {
  int rep = 0;
  std::string model;
  std::string level;
  double value = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  double reference_c = 0.0;
  double reference_c_se = 0.0;
  int true_r = 0;
  std::vector<ModelReport> models;
  std::vector<Failure> failures;
  std::vector<ReplicationRecord> records;  ///< one per (rep, model, level) score
  double seconds = 0.0;

  const ModelReport& model(const std::string& name) const;
};

/// Generates `reps` samples with seeds derive_seed(seed, rep) and scores
/// every model at every level. Failing (rep, model) pairs are recorded and
/// excluded from that model's means.
ExperimentReport run_experiment(ExperimentConfig config);

void write_report_json(const ExperimentReport& report, std::ostream& out);
std::string format_report_table(const ExperimentReport& report);
/// rep,model,level,msre rows for plotting.
void write_plot_csv(const ExperimentReport& report, std::ostream& out);

const char* to_string(LevelKind level);

}  // namespace tailfactor
