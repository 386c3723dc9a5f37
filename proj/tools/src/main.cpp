// tailfactor: command-line front end.
//
// Exit codes: 0 success, 2 argument or config error, 3 data error,
// 4 numerical failure, 1 anything else.

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "config_overlay.hpp"
#include "tailfactor/dgp.hpp"
#include "tailfactor/eot.hpp"
#include "tailfactor/error.hpp"
#include "tailfactor/evt.hpp"
#include "tailfactor/experiment.hpp"
#include "tailfactor/ftvm.hpp"
#include "tailfactor/panel.hpp"
#include "tailfactor/parallel.hpp"
#include "tailfactor/result_io.hpp"
#include "tailfactor/selection.hpp"
#include "tailfactor/threshold.hpp"

namespace tf = tailfactor;
using nlohmann::json;

namespace {

enum Exit { ok = 0, internal = 1, usage = 2, data = 3, numerical = 4 };

// Options shared by the panel subcommands.
struct Common {
  std::string panel_path;
  std::string format = "auto";
  std::string output;
  std::string config;
  std::optional<std::size_t> k;
  std::optional<double> k_frac;
  int threads = tf::default_thread_count();
};

struct TailFlags {
  double m = 0.1;
  double M = 1.6;
  std::optional<double> p;
  double c = 10.0;
  int rmax = 3;
  double tau_star = 0.5;
};

struct FitFlags {
  std::uint64_t seed = 0;
  int restarts = 5;
  int max_iters = 100;
  double tol = 1e-6;
  int inner_grid = 0;
};

void add_common(CLI::App* sub, Common& c, bool with_output) {
  sub->add_option("panel", c.panel_path, "Panel file (wide CSV, long CSV or JSON)");
  sub->add_option("--format", c.format, "Panel format: auto, wide-csv, long-csv, json")->capture_default_str();
  if (with_output) sub->add_option("-o,--output", c.output, "Result file (standard output when omitted)");
  sub->add_option("--k", c.k, "Intermediate order statistic k");
  sub->add_option("--k-frac", c.k_frac, "k as a fraction of NT, e.g. 0.1");
  sub->add_option("--threads", c.threads, "Worker threads (default: available cores)")
      ->envname("TAILFACTOR_THREADS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--config", c.config, "JSON object of flag values; flags given on the command line win");
}

void add_bounds(CLI::App* sub, TailFlags& t) {
  sub->add_option("--m", t.m, "Lower bound m on l_i'f_t")->capture_default_str();
  sub->add_option("--M", t.M, "Upper bound M on l_i'f_t")->capture_default_str();
}

void add_fit_flags(CLI::App* sub, FitFlags& f) {
  sub->add_option("--seed", f.seed, "Seed for random restarts")->capture_default_str();
  sub->add_option("--restarts", f.restarts, "Random restarts")->capture_default_str();
  sub->add_option("--max-iters", f.max_iters, "Alternation iterations per restart")->capture_default_str();
  sub->add_option("--tol", f.tol, "Relative loss tolerance")->capture_default_str();
  sub->add_option("--inner-grid", f.inner_grid, "Grid candidates per subproblem (0 = exact)")->capture_default_str();
}

tf::PanelData load(const Common& c) {
  if (c.panel_path.empty()) throw tf::ArgumentError("missing panel file");
  const auto format = c.format == "auto" ? tf::detect_panel_format(c.panel_path) : tf::parse_panel_format(c.format);
  return tf::load_panel_file(c.panel_path, format);
}

std::size_t resolve_k(const Common& c, std::size_t n_cells) {
  if (c.k && c.k_frac) throw tf::ArgumentError("--k and --k-frac are mutually exclusive");
  if (c.k) return *c.k;
  if (c.k_frac) return tf::k_from_fraction(*c.k_frac, n_cells);
  throw tf::ArgumentError("one of --k or --k-frac is required");
}

tf::TailConfig tail_config(const Common& c, const TailFlags& t, std::size_t n_cells) {
  tf::TailConfig cfg;
  cfg.k = resolve_k(c, n_cells);
  cfg.lower = t.m;
  cfg.upper = t.M;
  cfg.extreme_level = t.p;
  cfg.ic_constant = t.c;
  cfg.max_factors = t.rmax;
  cfg.central_level = t.tau_star;
  cfg.validate(n_cells);
  return cfg;
}

tf::FitOptions fit_options(const FitFlags& f, int threads) {
  tf::FitOptions opts;
  opts.seed = f.seed;
  opts.n_restarts = f.restarts;
  opts.max_outer_iters = f.max_iters;
  opts.loss_rel_tol = f.tol;
  opts.inner_grid = f.inner_grid;
  opts.threads = threads;
  opts.validate();
  return opts;
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    if (!content.empty() && content.back() != '\n') std::cout << '\n';
    std::cout.flush();
  } else {
    tf::write_file_atomic(path, content);
  }
}

json matrix_json(const tf::Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

struct Cli {
  CLI::App app{"tailfactor: factorized tail volatility models for heavy-tailed panels"};
  Common common;
  TailFlags tail;
  FitFlags fit;
  int r = 0;
  double alpha = 0.05;
  std::optional<std::size_t> hill_min, hill_max;
  std::string threshold = "qfm";
  int r_thr = 1;
  std::string covariates_path;
  bool force_degenerate = false;
  std::optional<int> force_r;
  tf::DgpSpec dgp;
  std::string truth_path;
  std::string covariates_out;
  std::string table_path;
  std::string plot_path;
  std::optional<int> reps;
  std::optional<std::uint64_t> bench_seed;
  bool quiet = false;

  CLI::App* fit_cmd = nullptr;
  CLI::App* evt_cmd = nullptr;
  CLI::App* validate_cmd = nullptr;
  CLI::App* select_cmd = nullptr;
  CLI::App* eot_cmd = nullptr;
  CLI::App* simulate_cmd = nullptr;
  CLI::App* bench_cmd = nullptr;

  Cli() {
    app.require_subcommand(1);
    app.set_version_flag("--version", "tailfactor 0.1.0");

    fit_cmd = app.add_subcommand("fit", "Fit the factorized tail volatility model with r factors");
    add_common(fit_cmd, common, true);
    fit_cmd->add_option("--r", r, "Number of factors (>= 1)");
    add_bounds(fit_cmd, tail);
    fit_cmd->add_option("--p", tail.p, "Extreme level p for the reported extreme surface");
    add_fit_flags(fit_cmd, fit);

    evt_cmd = app.add_subcommand("evt", "Pooled intermediate quantile and Hill estimate");
    add_common(evt_cmd, common, true);
    evt_cmd->add_option("--p", tail.p, "Extreme level p for the Weissman quantile");
    evt_cmd->add_option("--hill-min", hill_min, "Smallest k of the Hill plot");
    evt_cmd->add_option("--hill-max", hill_max, "Largest k of the Hill plot");

    validate_cmd = app.add_subcommand("validate", "Kolmogorov-Smirnov test of the degenerate tail model");
    add_common(validate_cmd, common, true);
    validate_cmd->add_option("--alpha", alpha, "Test level: 0.1, 0.05 or 0.01")->capture_default_str();

    select_cmd = app.add_subcommand("select", "Information-criterion choice of the factor count");
    add_common(select_cmd, common, true);
    select_cmd->add_option("--rmax", tail.rmax, "Largest factor count scanned")->capture_default_str();
    select_cmd->add_option("--c", tail.c, "Penalty constant c")->capture_default_str();
    add_bounds(select_cmd, tail);
    add_fit_flags(select_cmd, fit);

    eot_cmd = app.add_subcommand("eot", "Excess-over-threshold pipeline");
    add_common(eot_cmd, common, true);
    eot_cmd->add_option("--threshold", threshold, "Threshold model: constant, qfm, qr")->capture_default_str();
    eot_cmd->add_option("--r-thr", r_thr, "Factor count of the qfm threshold")->capture_default_str();
    eot_cmd->add_option("--tau-star", tail.tau_star, "Central level of the threshold")->capture_default_str();
    eot_cmd->add_option("--p", tail.p, "Extreme level p");
    eot_cmd->add_option("--alpha", alpha, "KS test level: 0.1, 0.05 or 0.01")->capture_default_str();
    eot_cmd->add_option("--rmax", tail.rmax, "Largest factor count scanned")->capture_default_str();
    eot_cmd->add_option("--c", tail.c, "Penalty constant c")->capture_default_str();
    eot_cmd->add_option("--covariates", covariates_path, "Covariate CSV for the qr threshold");
    eot_cmd->add_flag("--force-degenerate", force_degenerate, "Skip selection, use r = 0");
    eot_cmd->add_option("--force-r", force_r, "Skip selection, fit this many factors");
    add_bounds(eot_cmd, tail);
    add_fit_flags(eot_cmd, fit);

    simulate_cmd = app.add_subcommand("simulate", "Draw a panel from DGP 1-5");
    simulate_cmd->add_option("--dgp", dgp.dgp, "Data generating process 1..5")->capture_default_str();
    simulate_cmd->add_option("--N", dgp.N, "Units")->capture_default_str();
    simulate_cmd->add_option("--T", dgp.T, "Time periods")->capture_default_str();
    simulate_cmd->add_option("--lambda", dgp.lambda, "Tail parameter lambda")->capture_default_str();
    simulate_cmd->add_option("--seed", dgp.seed, "Seed")->capture_default_str();
    simulate_cmd->add_option("-o,--output", common.output, "Panel file (standard output when omitted)");
    simulate_cmd->add_option("--format", common.format, "Panel format: auto, wide-csv, long-csv, json")
        ->capture_default_str();
    simulate_cmd->add_option("--truth", truth_path, "JSON file with the true volatility components");
    simulate_cmd->add_option("--covariates-out", covariates_out, "Covariate CSV (DGP5)");
    simulate_cmd->add_option("--config", common.config, "JSON object of flag values; flags given on the command line win");

    bench_cmd = app.add_subcommand("bench", "Monte Carlo experiment from a JSON configuration");
    bench_cmd->add_option("--config", common.config, "Experiment configuration (docs/experiment_config.md)");
    bench_cmd->add_option("-o,--output", common.output, "Report JSON (standard output when omitted)");
    bench_cmd->add_option("--table", table_path, "Aligned text table");
    bench_cmd->add_option("--plot-csv", plot_path, "Per-replication rep,model,level,msre rows");
    bench_cmd->add_option("--reps", reps, "Override the configured replication count");
    bench_cmd->add_option("--seed", bench_seed, "Override the configured DGP seed");
    bench_cmd->add_option("--threads", common.threads, "Worker threads (default: available cores)")
        ->envname("TAILFACTOR_THREADS")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench_cmd->add_flag("-q,--quiet", quiet, "Do not print the table to standard error");
  }

  void apply_config(CLI::App* sub) {
    if (common.config.empty() || sub == bench_cmd) return;
    tailfactor::cli::ConfigOverlay overlay(*sub);
    overlay.bind_all();
    overlay.apply(common.config);
  }

  int run_fit() {
    const auto panel = load(common);
    const auto cfg = tail_config(common, tail, panel.n_cells());
    if (r < 1) throw tf::ArgumentError("--r must be at least 1");
    const auto result = tf::fit_ftvm(panel, r, cfg, fit_options(fit, common.threads));
    std::ostringstream out;
    tf::save_result(result, out);
    emit(common.output, out.str());
    return ok;
  }

  int run_evt() {
    const auto panel = load(common);
    const std::size_t k = resolve_k(common, panel.n_cells());
    const auto values = panel.pooled();
    const auto est = tf::estimate_tail(values, k);
    json doc = json::parse(tf::to_json(est));
    if (tail.p) {
      doc["p"] = *tail.p;
      doc["weissman_quantile"] = tf::weissman_extrapolate(est.u_intermediate, *est.gamma_hat, k, est.n, *tail.p);
    }
    if (hill_min || hill_max) {
      const std::size_t lo = hill_min.value_or(2);
      const std::size_t hi = hill_max.value_or(std::min(values.size() - 1, 10 * k));
      json plot = json::array();
      for (const auto& pt : tf::hill_plot(values, lo, hi)) {
        plot.push_back({{"k", pt.k}, {"gamma_hat", pt.gamma_hat}, {"u_intermediate", pt.u_intermediate}});
      }
      doc["hill_plot"] = std::move(plot);
    }
    emit(common.output, doc.dump(2));
    return ok;
  }

  int run_validate() {
    tf::require_alpha(alpha);
    const auto panel = load(common);
    const std::size_t k = resolve_k(common, panel.n_cells());
    const auto report = tf::ks_test(panel.values(), k);
    json doc = json::parse(tf::to_json(report));
    doc["alpha"] = alpha;
    doc["reject"] = report.p_value < alpha;
    emit(common.output, doc.dump(2));
    return ok;
  }

  int run_select() {
    const auto panel = load(common);
    const auto cfg = tail_config(common, tail, panel.n_cells());
    const auto report = tf::ic_select(panel, cfg, fit_options(fit, common.threads));
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    emit(common.output, tf::to_json(report));
    return ok;
  }

  int run_eot() {
    tf::require_alpha(alpha);
    if (force_degenerate && force_r) throw tf::ArgumentError("--force-degenerate and --force-r are mutually exclusive");
    const auto panel = load(common);
    const auto cfg = tail_config(common, tail, panel.n_cells());
    tf::ThresholdModel model;
    model.kind = tf::parse_threshold_kind(threshold);
    model.r_thr = r_thr;
    std::optional<tf::Covariates> cov;
    if (!covariates_path.empty()) {
      std::ifstream in(covariates_path);
      if (!in) throw tf::IoError("cannot open '" + covariates_path + "'");
      cov = tf::load_covariates(in, panel);
    }
    tf::EotOverrides overrides;
    overrides.force_degenerate = force_degenerate;
    overrides.force_r = force_r;
    const auto result = tf::run_eot(panel, cov ? &*cov : nullptr, model, cfg, alpha,
                                    fit_options(fit, common.threads), overrides);
    std::ostringstream out;
    tf::save_result(result, out);
    emit(common.output, out.str());
    return ok;
  }

  int run_simulate() {
    dgp.validate();
    const auto sample = tf::generate(dgp);
    tf::PanelFormat format = tf::PanelFormat::wide_csv;
    if (common.format != "auto") {
      format = tf::parse_panel_format(common.format);
    } else if (common.output.size() >= 5 && common.output.compare(common.output.size() - 5, 5, ".json") == 0) {
      format = tf::PanelFormat::json;
    }
    std::ostringstream panel_text;
    tf::save_panel(sample.panel, panel_text, format);
    emit(common.output, panel_text.str());

    if (!truth_path.empty()) {
      json truth{{"dgp", dgp.dgp},
                 {"N", dgp.N},
                 {"T", dgp.T},
                 {"lambda", dgp.lambda},
                 {"seed", dgp.seed},
                 {"true_r", sample.true_factors.rows()},
                 {"c_sample", sample.c_sample},
                 {"loadings", matrix_json(sample.true_loadings)},
                 {"factors", matrix_json(sample.true_factors)}};
      if (sample.true_threshold) truth["threshold"] = matrix_json(*sample.true_threshold);
      if (sample.coefficients.size() > 0) truth["coefficients"] = matrix_json(sample.coefficients);
      tf::write_file_atomic(truth_path, truth.dump(2) + "\n");
    }
    if (!covariates_out.empty()) {
      if (!sample.covariates) throw tf::ArgumentError("--covariates-out needs DGP 5");
      std::ostringstream cov_text;
      tf::save_covariates(*sample.covariates, sample.panel, cov_text);
      tf::write_file_atomic(covariates_out, cov_text.str());
    }
    return ok;
  }

  int run_bench() {
    if (common.config.empty()) throw tf::ArgumentError("bench needs --config");
    std::ifstream in(common.config);
    if (!in) throw tf::ArgumentError("cannot open config file '" + common.config + "'");
    auto config = tf::parse_experiment_config(in);
    if (reps) config.reps = *reps;
    if (bench_seed) config.dgp.seed = *bench_seed;
    if (bench_cmd->get_option("--threads")->count() > 0 || std::getenv("TAILFACTOR_THREADS") != nullptr) {
      config.threads = common.threads;
    }
    const auto report = tf::run_experiment(config);
    std::ostringstream out;
    tf::write_report_json(report, out);
    emit(common.output, out.str());
    const std::string table = tf::format_report_table(report);
    if (!table_path.empty()) tf::write_file_atomic(table_path, table);
    if (!plot_path.empty()) {
      std::ostringstream csv;
      tf::write_plot_csv(report, csv);
      tf::write_file_atomic(plot_path, csv.str());
    }
    if (!quiet && !common.output.empty()) std::cerr << table;
    for (const auto& f : report.failures) {
      std::cerr << "warning: rep " << f.rep << " model " << f.model << ": " << f.cause << '\n';
    }
    return ok;
  }

  int dispatch() {
    for (CLI::App* sub : {fit_cmd, evt_cmd, validate_cmd, select_cmd, eot_cmd, simulate_cmd, bench_cmd}) {
      if (!sub->parsed()) continue;
      apply_config(sub);
      if (sub == fit_cmd) return run_fit();
      if (sub == evt_cmd) return run_evt();
      if (sub == validate_cmd) return run_validate();
      if (sub == select_cmd) return run_select();
      if (sub == eot_cmd) return run_eot();
      if (sub == simulate_cmd) return run_simulate();
      return run_bench();
    }
    return usage;
  }
};

}  // namespace

int main(int argc, char** argv) {
  auto cli = std::make_unique<Cli>();
  try {
    cli->app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli->app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli->app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return cli->app.exit(e);
  } catch (const CLI::ParseError& e) {
    cli->app.exit(e);
    return usage;
  }

  try {
    return cli->dispatch();
  } catch (const tf::ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage;
  } catch (const tf::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return data;
  } catch (const tf::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return data;
  } catch (const tf::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return numerical;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return internal;
  }
}
