#include "tailfactor/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "tailfactor/eot.hpp"
#include "tailfactor/error.hpp"
#include "tailfactor/evt.hpp"
#include "tailfactor/ftvm.hpp"
#include "tailfactor/metrics.hpp"
#include "tailfactor/parallel.hpp"
#include "tailfactor/rng.hpp"
#include "tailfactor/selection.hpp"

namespace tailfactor {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Score {
  std::string level;
  double value;
};

struct ModelOutcome {
  std::vector<Score> scores;
  std::optional<std::string> error;
  double seconds = 0.0;
  bool has_selection = false;
  bool rejected = false;
  int r_hat = 0;
};

struct RepOutcome {
  std::vector<ModelOutcome> models;
};

int true_factor_count(int dgp) { return dgp == 2 || dgp == 3 ? 2 : 1; }

ThresholdModel threshold_for(const ExperimentConfig& cfg) {
  if (cfg.dgp.dgp == 4) return {ThresholdKind::qfm, cfg.qfm_threshold_r};
  if (cfg.dgp.dgp == 5) return {ThresholdKind::per_unit_qr, 0};
  return {ThresholdKind::constant, 0};
}

double level_tau(const ExperimentConfig& cfg, LevelKind level, std::size_t n) {
  if (level == LevelKind::intermediate) return static_cast<double>(cfg.cfg.k) / static_cast<double>(n);
  return *cfg.cfg.extreme_level;
}

RepOutcome run_replication(const ExperimentConfig& cfg, int rep, double c_ref) {
  DgpSpec spec = cfg.dgp;
  spec.seed = derive_seed(cfg.dgp.seed, static_cast<std::uint64_t>(rep));
  const DgpSample sample = generate(spec);
  const PanelData& panel = sample.panel;
  const std::size_t n = panel.n_cells();
  const auto N = static_cast<Eigen::Index>(panel.n_units());
  const auto T = static_cast<Eigen::Index>(panel.n_times());
  FitOptions fit = cfg.fit;
  fit.threads = 1;
  fit.seed = derive_seed(spec.seed, 0xF17);

  std::vector<Matrix> truth;
  std::vector<double> reference;
  for (auto level : cfg.levels) {
    const double tau = level_tau(cfg, level, n);
    truth.push_back(true_quantile_surface(sample, spec.dgp, spec.lambda, tau));
    reference.push_back(reference_quantile(spec.dgp, spec.lambda, c_ref, tau));
  }
  auto score_surfaces = [&](ModelOutcome& out, auto&& surface_at) {
    for (std::size_t j = 0; j < cfg.levels.size(); ++j) {
      const Matrix s = surface_at(cfg.levels[j]);
      out.scores.push_back({to_string(cfg.levels[j]), msre_surface(s, truth[j], reference[j])});
    }
  };
  auto weissman = [&](double gamma, LevelKind level) {
    return level == LevelKind::intermediate ? 1.0 : weissman_extrapolate(1.0, gamma, cfg.cfg.k, n, *cfg.cfg.extreme_level);
  };

  RepOutcome result;
  for (const auto& model : cfg.models) {
    ModelOutcome out;
    const auto start = Clock::now();
    try {
      switch (model.kind) {
        case ModelKind::degenerate: {
          const TailEstimates tail = estimate_tail(panel.pooled(), cfg.cfg.k, false);
          score_surfaces(out, [&](LevelKind level) {
            const double g = level == LevelKind::intermediate ? 0.0 : tail.gamma_hat.value();
            return Matrix::Constant(N, T, tail.u_intermediate * weissman(g, level));
          });
          break;
        }
        case ModelKind::ftvm: {
          const FitResult res = fit_ftvm(panel, model.r, cfg.cfg, fit);
          score_surfaces(out, [&](LevelKind level) {
            QuantileLevel q;
            if (level == LevelKind::extreme) q.p = cfg.cfg.extreme_level;
            return predict_quantiles(res, q);
          });
          break;
        }
        case ModelKind::qfm:
          score_surfaces(out, [&](LevelKind level) {
            return fit_qfm(panel.values(), cfg.qfm_tail_r, level_tau(cfg, level, n), fit).surface;
          });
          break;
        case ModelKind::qrife:
          if (!sample.covariates) throw ArgumentError("qrife needs covariates (DGP5)");
          score_surfaces(out, [&](LevelKind level) {
            return fit_per_unit_qr(panel, *sample.covariates, level_tau(cfg, level, n), 1).surface;
          });
          break;
        case ModelKind::eotm0:
        case ModelKind::eotm1: {
          EotOverrides ov;
          if (model.kind == ModelKind::eotm0) ov.force_degenerate = true;
          else ov.force_r = 1;
          const Covariates* cov = sample.covariates ? &*sample.covariates : nullptr;
          const EoTResult res = run_eot(panel, cov, threshold_for(cfg), cfg.cfg, cfg.alpha, fit, ov);
          score_surfaces(out, [&](LevelKind level) {
            return level == LevelKind::intermediate ? res.intermediate_surface : res.extreme_surface;
          });
          break;
        }
        case ModelKind::select: {
          // KS verdict and IC choice are both recorded on every replication;
          // the scored surface follows validate-then-select.
          const KsReport ks = ks_test(panel.values(), cfg.cfg.k);
          const IcReport ic = ic_select(panel, cfg.cfg, fit);
          out.has_selection = true;
          out.rejected = ks.p_value < cfg.alpha;
          out.r_hat = ic.r_hat;
          const TailEstimates tail = estimate_tail(panel.pooled(), cfg.cfg.k, false);
          const FitResult* chosen =
              out.rejected && ic.r_hat > 0 ? &ic.fits[static_cast<std::size_t>(ic.r_hat - 1)] : nullptr;
          score_surfaces(out, [&](LevelKind level) {
            if (chosen) {
              QuantileLevel q;
              if (level == LevelKind::extreme) q.p = cfg.cfg.extreme_level;
              return predict_quantiles(*chosen, q);
            }
            const double g = level == LevelKind::intermediate ? 0.0 : tail.gamma_hat.value();
            return Matrix(Matrix::Constant(N, T, tail.u_intermediate * weissman(g, level)));
          });
          break;
        }
      }
    } catch (const std::exception& e) {
      out.error = e.what();
      out.scores.clear();
    }
    out.seconds = seconds_since(start);
    result.models.push_back(std::move(out));
  }
  return result;
}

}  // namespace

std::string ModelSpec::name() const {
  switch (kind) {
    case ModelKind::degenerate: return "degenerate";
    case ModelKind::ftvm: return "ftvm(" + std::to_string(r) + ")";
    case ModelKind::qfm: return "qfm";
    case ModelKind::qrife: return "qrife";
    case ModelKind::eotm0: return "eotm0";
    case ModelKind::eotm1: return "eotm1";
    case ModelKind::select: return "select";
  }
  return "?";
}

ModelSpec ModelSpec::parse(const std::string& name) {
  if (name == "degenerate") return {ModelKind::degenerate, 0};
  if (name == "qfm") return {ModelKind::qfm, 0};
  if (name == "qrife") return {ModelKind::qrife, 0};
  if (name == "eotm0") return {ModelKind::eotm0, 0};
  if (name == "eotm1") return {ModelKind::eotm1, 0};
  if (name == "select") return {ModelKind::select, 0};
  static const std::regex ftvm_re(R"(ftvm\((\d+)\))");
  std::smatch m;
  if (std::regex_match(name, m, ftvm_re)) {
    const int r = std::stoi(m[1]);
    if (r < 1) throw ArgumentError("ftvm(r) needs r >= 1");
    return {ModelKind::ftvm, r};
  }
  throw ArgumentError("unknown model '" + name +
                      "' (expected degenerate, ftvm(r), qfm, qrife, eotm0, eotm1 or select)");
}

const char* to_string(LevelKind level) {
  return level == LevelKind::intermediate ? "intermediate" : "extreme";
}

void ExperimentConfig::finalize() {
  dgp.validate();
  const std::size_t n = dgp.N * dgp.T;
  if (k_frac) cfg.k = k_from_fraction(*k_frac, n);
  cfg.validate(n);
  fit.validate();
  require_alpha(alpha);
  if (reps < 1) throw ArgumentError("reps must be >= 1");
  if (models.empty()) throw ArgumentError("model grid must not be empty");
  if (levels.empty()) throw ArgumentError("at least one quantile level is required");
  if (threads < 1) throw ArgumentError("threads must be >= 1");
  if (reference_reps < 1) throw ArgumentError("reference_reps must be >= 1");
  if (qfm_tail_r < 1 || qfm_threshold_r < 1) throw ArgumentError("QFM factor counts must be >= 1");
  for (auto level : levels) {
    if (level == LevelKind::extreme && !cfg.extreme_level) {
      throw ArgumentError("the extreme level needs p in the configuration");
    }
  }
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("invalid experiment config JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ArgumentError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      const std::string& key = it.key();
      const auto& v = it.value();
      if (key == "dgp") c.dgp.dgp = v.get<int>();
      else if (key == "N") c.dgp.N = v.get<std::size_t>();
      else if (key == "T") c.dgp.T = v.get<std::size_t>();
      else if (key == "lambda") c.dgp.lambda = v.get<double>();
      else if (key == "seed") c.dgp.seed = v.get<std::uint64_t>();
      else if (key == "reps") c.reps = v.get<int>();
      else if (key == "k") c.cfg.k = v.get<std::size_t>();
      else if (key == "k_frac") c.k_frac = v.get<double>();
      else if (key == "m") c.cfg.lower = v.get<double>();
      else if (key == "M") c.cfg.upper = v.get<double>();
      else if (key == "p") c.cfg.extreme_level = v.get<double>();
      else if (key == "tau_star") c.cfg.central_level = v.get<double>();
      else if (key == "c") c.cfg.ic_constant = v.get<double>();
      else if (key == "r_max") c.cfg.max_factors = v.get<int>();
      else if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "models") {
        for (const auto& m : v) c.models.push_back(ModelSpec::parse(m.get<std::string>()));
      } else if (key == "levels") {
        c.levels.clear();
        for (const auto& l : v) {
          const auto name = l.get<std::string>();
          if (name == "intermediate") c.levels.push_back(LevelKind::intermediate);
          else if (name == "extreme") c.levels.push_back(LevelKind::extreme);
          else throw ArgumentError("unknown level '" + name + "'");
        }
      } else if (key == "restarts") c.fit.n_restarts = v.get<int>();
      else if (key == "max_outer_iters") c.fit.max_outer_iters = v.get<int>();
      else if (key == "loss_rel_tol") c.fit.loss_rel_tol = v.get<double>();
      else if (key == "inner_grid") c.fit.inner_grid = v.get<int>();
      else if (key == "threads") c.threads = v.get<int>();
      else if (key == "reference_reps") c.reference_reps = v.get<int>();
      else if (key == "qfm_tail_r") c.qfm_tail_r = v.get<int>();
      else if (key == "qfm_threshold_r") c.qfm_threshold_r = v.get<int>();
      else throw ArgumentError("unknown experiment config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("experiment config has a value of the wrong type: ") + e.what());
  }
  if (!doc.contains("k") && !c.k_frac) c.k_frac = 0.1;
  c.finalize();
  return c;
}

double Aggregate::mean() const { return count == 0 ? std::nan("") : sum / static_cast<double>(count); }

double Aggregate::std_error() const {
  if (count < 2) return 0.0;
  const double m = mean();
  const double var = std::max(0.0, (sum_sq - static_cast<double>(count) * m * m) / static_cast<double>(count - 1));
  return std::sqrt(var / static_cast<double>(count));
}

const ModelReport& ExperimentReport::model(const std::string& name) const {
  for (const auto& m : models) {
    if (m.model == name) return m;
  }
  throw ArgumentError("no model '" + name + "' in the report");
}

ExperimentReport run_experiment(ExperimentConfig config) {
  config.finalize();
  const auto start = Clock::now();
  ExperimentReport report;
  const ReferenceConstant c = reference_constant(config.dgp, config.reference_reps);
  report.reference_c = c.value;
  report.reference_c_se = c.std_error;
  report.true_r = true_factor_count(config.dgp.dgp);

  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(config.reps));
  parallel_for(outcomes.size(), config.threads, [&](std::size_t rep) {
    outcomes[rep] = run_replication(config, static_cast<int>(rep), c.value);
  });

  for (const auto& m : config.models) report.models.push_back(ModelReport{m.name(), {}, 0, 0.0, {}, {}, {}});
  for (std::size_t rep = 0; rep < outcomes.size(); ++rep) {
    for (std::size_t j = 0; j < config.models.size(); ++j) {
      const auto& out = outcomes[rep].models[j];
      auto& agg = report.models[j];
      agg.seconds += out.seconds;
      if (out.error) {
        ++agg.failures;
        report.failures.push_back({static_cast<int>(rep), agg.model, *out.error});
        continue;
      }
      for (const auto& s : out.scores) {
        agg.msre[s.level].add(s.value);
        report.records.push_back({static_cast<int>(rep), agg.model, s.level, s.value});
      }
      if (out.has_selection) {
        agg.rejection.add(out.rejected ? 1.0 : 0.0);
        agg.r_hat.add(out.r_hat);
        agg.correct.add(out.r_hat == report.true_r ? 1.0 : 0.0);
      }
    }
  }
  report.config = std::move(config);
  report.seconds = seconds_since(start);
  return report;
}

void write_report_json(const ExperimentReport& report, std::ostream& out) {
  using json = nlohmann::ordered_json;
  const auto& c = report.config;
  json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "experiment_report";
  json cfg;
  cfg["dgp"] = c.dgp.dgp;
  cfg["N"] = c.dgp.N;
  cfg["T"] = c.dgp.T;
  cfg["lambda"] = c.dgp.lambda;
  cfg["seed"] = c.dgp.seed;
  cfg["reps"] = c.reps;
  cfg["k"] = c.cfg.k;
  cfg["m"] = c.cfg.lower;
  cfg["M"] = c.cfg.upper;
  cfg["p"] = c.cfg.extreme_level ? json(*c.cfg.extreme_level) : json(nullptr);
  cfg["tau_star"] = c.cfg.central_level;
  cfg["c"] = c.cfg.ic_constant;
  cfg["r_max"] = c.cfg.max_factors;
  cfg["alpha"] = c.alpha;
  cfg["restarts"] = c.fit.n_restarts;
  cfg["max_outer_iters"] = c.fit.max_outer_iters;
  cfg["loss_rel_tol"] = c.fit.loss_rel_tol;
  cfg["reference_reps"] = c.reference_reps;
  cfg["qfm_tail_r"] = c.qfm_tail_r;
  auto names = json::array();
  for (const auto& m : c.models) names.push_back(m.name());
  cfg["models"] = names;
  auto levels = json::array();
  for (auto l : c.levels) levels.push_back(to_string(l));
  cfg["levels"] = levels;
  doc["config"] = cfg;
  doc["reference_c"] = report.reference_c;
  doc["reference_c_se"] = report.reference_c_se;
  doc["true_r"] = report.true_r;
  auto models = json::array();
  for (const auto& m : report.models) {
    json jm;
    jm["model"] = m.model;
    json levels_json;
    for (const auto& [level, agg] : m.msre) {
      levels_json[level] = {{"mean", agg.mean()}, {"std_error", agg.std_error()}, {"count", agg.count}};
    }
    jm["msre"] = levels_json;
    jm["failures"] = m.failures;
    jm["seconds_total"] = m.seconds;
    if (m.rejection.count > 0) {
      jm["rejection_frequency"] = m.rejection.mean();
      jm["mean_r_hat"] = m.r_hat.mean();
      jm["selection_frequency"] = m.correct.mean();
    }
    models.push_back(jm);
  }
  doc["models"] = models;
  auto failures = json::array();
  for (const auto& f : report.failures) failures.push_back({{"rep", f.rep}, {"model", f.model}, {"cause", f.cause}});
  doc["failures"] = failures;
  doc["seconds"] = report.seconds;
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed to write experiment report");
}

std::string format_report_table(const ExperimentReport& report) {
  const auto& c = report.config;
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "DGP%d  lambda=%g  (N,T)=(%zu,%zu)  k=%zu  m=%g  M=%g  reps=%d  c=%.4f\n",
                c.dgp.dgp, c.dgp.lambda, c.dgp.N, c.dgp.T, c.cfg.k, c.cfg.lower, c.cfg.upper, c.reps,
                report.reference_c);
  os << line;
  os << "MSRE x 1e-3 (Monte Carlo standard error in parentheses)\n";
  std::snprintf(line, sizeof line, "%-12s", "model");
  os << line;
  for (auto l : c.levels) {
    std::snprintf(line, sizeof line, " %22s", to_string(l));
    os << line;
  }
  os << "  failures\n";
  for (const auto& m : report.models) {
    std::snprintf(line, sizeof line, "%-12s", m.model.c_str());
    os << line;
    for (auto l : c.levels) {
      const auto it = m.msre.find(to_string(l));
      if (it == m.msre.end()) {
        std::snprintf(line, sizeof line, " %22s", "-");
      } else {
        std::snprintf(line, sizeof line, " %12.1f (%7.2f)", 1e3 * it->second.mean(), 1e3 * it->second.std_error());
      }
      os << line;
    }
    std::snprintf(line, sizeof line, "  %zu\n", m.failures);
    os << line;
  }
  for (const auto& m : report.models) {
    if (m.rejection.count == 0) continue;
    std::snprintf(line, sizeof line, "%s: RF=%.1f%%  mean r_hat=%.2f  PE=%.1f%%\n", m.model.c_str(),
                  100.0 * m.rejection.mean(), m.r_hat.mean(), 100.0 * m.correct.mean());
    os << line;
  }
  return os.str();
}

void write_plot_csv(const ExperimentReport& report, std::ostream& out) {
  out << "rep,model,level,msre\n";
  char buf[32];
  for (const auto& r : report.records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << r.rep << ',' << r.model << ',' << r.level << ',' << buf << '\n';
  }
  if (!out) throw IoError("failed to write plot CSV");
}

}  // namespace tailfactor
