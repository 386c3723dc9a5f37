#include "tailfactor/result_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>

#include <json.hpp>

#include "tailfactor/error.hpp"

namespace tailfactor {
namespace {

using json = nlohmann::ordered_json;

json matrix_json(const Matrix& m) {
  auto rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from(const json& j, Eigen::Index cols_if_empty = 0) {
  if (!j.is_array()) throw DataError("expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? cols_if_empty : static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw DataError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json tail_json(const TailEstimates& t) {
  json j;
  j["u_intermediate"] = t.u_intermediate;
  j["gamma_hat"] = t.gamma_hat ? json(*t.gamma_hat) : json(nullptr);
  j["k"] = t.k;
  j["n"] = t.n;
  return j;
}

TailEstimates tail_from(const json& j) {
  TailEstimates t;
  t.u_intermediate = j.at("u_intermediate").get<double>();
  if (!j.at("gamma_hat").is_null()) t.gamma_hat = j.at("gamma_hat").get<double>();
  t.k = j.at("k").get<std::size_t>();
  t.n = j.at("n").get<std::size_t>();
  return t;
}

json ks_json(const KsReport& r) {
  json j;
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  j["k"] = r.k;
  json rej;
  for (const auto& [level, flag] : r.reject_at) {
    char key[16];
    std::snprintf(key, sizeof key, "%.2f", level);
    rej[key] = flag;
  }
  j["reject_at"] = rej;
  j["note"] = r.note;
  return j;
}

KsReport ks_from(const json& j) {
  KsReport r;
  r.statistic = j.at("statistic").get<double>();
  r.p_value = j.at("p_value").get<double>();
  r.k = j.at("k").get<std::size_t>();
  for (auto it = j.at("reject_at").begin(); it != j.at("reject_at").end(); ++it) {
    r.reject_at[std::stod(it.key())] = it.value().get<bool>();
  }
  r.note = j.value("note", "");
  return r;
}

json fit_json(const FitResult& r) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = "fit_result";
  j["r"] = r.model.r();
  j["tau"] = r.tau;
  j["m"] = r.lower;
  j["M"] = r.upper;
  j["tail"] = tail_json(r.tail);
  j["loadings"] = matrix_json(r.model.loadings);
  j["factors"] = matrix_json(r.model.factors);
  j["final_loss"] = r.final_loss;
  j["loss_trace"] = r.loss_trace;
  j["iterations"] = r.iterations;
  j["restarts_used"] = r.restarts_used;
  return j;
}

FitResult fit_from(const json& j) {
  FitResult r;
  r.tau = j.at("tau").get<double>();
  r.lower = j.at("m").get<double>();
  r.upper = j.at("M").get<double>();
  r.tail = tail_from(j.at("tail"));
  r.model.loadings = matrix_from(j.at("loadings"));
  r.model.factors = matrix_from(j.at("factors"));
  r.final_loss = j.at("final_loss").get<double>();
  r.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  r.iterations = j.at("iterations").get<int>();
  r.restarts_used = j.at("restarts_used").get<int>();
  return r;
}

json ic_json(const IcReport& r) {
  json j;
  j["r_hat"] = r.r_hat;
  j["penalty_base"] = r.penalty_base;
  auto terms = json::array();
  for (std::size_t l = 0; l < r.criterion_values.size(); ++l) {
    const auto& t = r.criterion_values[l];
    terms.push_back({{"l", l}, {"loss_term", t.loss_term}, {"penalty", t.penalty}, {"total", t.total}});
  }
  j["criterion_values"] = terms;
  j["warnings"] = r.warnings;
  return j;
}

json parse_document(std::istream& in, const char* kind) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid result JSON: ") + e.what());
  }
  if (doc.value("schema_version", 0) != 1) throw DataError("unsupported result schema_version");
  if (doc.value("kind", std::string()) != kind) {
    throw DataError(std::string("expected a document of kind '") + kind + "'");
  }
  return doc;
}

void emit(const json& doc, std::ostream& out) {
  out << doc.dump(2) << '\n';
  out.flush();
  if (!out) throw IoError("failed to write result JSON");
}

}  // namespace

void save_result(const FitResult& result, std::ostream& out) { emit(fit_json(result), out); }

void save_result(const EoTResult& r, std::ostream& out) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = "eot_result";
  j["threshold_model"] = to_string(r.threshold_model.kind);
  j["k"] = r.k;
  j["n"] = r.n;
  j["u_adj"] = r.u_adj;
  j["gamma_adj"] = r.gamma_adj;
  j["ks_adj"] = ks_json(r.ks_adj);
  j["r_selected"] = r.r_selected;
  j["ic"] = r.ic ? ic_json(*r.ic) : json(nullptr);
  j["fit"] = r.fit ? fit_json(*r.fit) : json(nullptr);
  j["extreme_level"] = r.extreme_level ? json(*r.extreme_level) : json(nullptr);
  j["threshold_surface"] = matrix_json(r.threshold_surface);
  j["excess_panel"] = matrix_json(r.excess_panel);
  j["excess_surface"] = matrix_json(r.excess_surface);
  j["intermediate_surface"] = matrix_json(r.intermediate_surface);
  j["extreme_surface"] = matrix_json(r.extreme_surface);
  emit(j, out);
}

FitResult load_fit_result(std::istream& in) {
  const json doc = parse_document(in, "fit_result");
  try {
    return fit_from(doc);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed fit result: ") + e.what());
  }
}

EoTResult load_eot_result(std::istream& in) {
  const json doc = parse_document(in, "eot_result");
  try {
    EoTResult r;
    r.threshold_model.kind = parse_threshold_kind(doc.at("threshold_model").get<std::string>());
    r.k = doc.at("k").get<std::size_t>();
    r.n = doc.at("n").get<std::size_t>();
    r.u_adj = doc.at("u_adj").get<double>();
    r.gamma_adj = doc.at("gamma_adj").get<double>();
    r.ks_adj = ks_from(doc.at("ks_adj"));
    r.r_selected = doc.at("r_selected").get<int>();
    if (!doc.at("fit").is_null()) r.fit = fit_from(doc.at("fit"));
    if (!doc.at("extreme_level").is_null()) r.extreme_level = doc.at("extreme_level").get<double>();
    r.threshold_surface = matrix_from(doc.at("threshold_surface"));
    r.excess_panel = matrix_from(doc.at("excess_panel"));
    r.excess_surface = matrix_from(doc.at("excess_surface"));
    r.intermediate_surface = matrix_from(doc.at("intermediate_surface"));
    r.extreme_surface = matrix_from(doc.at("extreme_surface"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed EoT result: ") + e.what());
  }
}

std::string to_json(const TailEstimates& tail) {
  json j{{"schema_version", 1}, {"kind", "tail_estimates"}};
  j.update(tail_json(tail));
  return j.dump(2);
}

std::string to_json(const KsReport& report) {
  json j{{"schema_version", 1}, {"kind", "ks_report"}};
  j.update(ks_json(report));
  return j.dump(2);
}

std::string to_json(const IcReport& report) {
  json j{{"schema_version", 1}, {"kind", "ic_report"}};
  j.update(ic_json(report));
  return j.dump(2);
}

std::string to_json(const Selection& sel) {
  json j{{"schema_version", 1}, {"kind", "selection"}};
  j["degenerate"] = sel.degenerate;
  j["r_hat"] = sel.r_hat;
  j["ks"] = ks_json(sel.ks);
  j["ic"] = sel.ic ? ic_json(*sel.ic) : json(nullptr);
  return j.dump(2);
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path dir = target.has_parent_path() ? target.parent_path() : fs::path(".");
  std::random_device rd;
  const fs::path tmp = dir / ("." + target.filename().string() + ".tmp" + std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path + "'");
  }
}

}  // namespace tailfactor
