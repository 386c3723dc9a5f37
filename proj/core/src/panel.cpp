#include "tailfactor/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "tailfactor/error.hpp"

namespace tailfactor {
namespace {

std::vector<std::string> default_labels(char prefix, Eigen::Index n) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) out.push_back(prefix + std::to_string(j + 1));
  return out;
}

void require_unique(const std::vector<std::string>& labels, const char* what) {
  std::set<std::string_view> seen;
  for (const auto& label : labels) {
    if (!seen.insert(label).second) {
      throw DataError(std::string("duplicate ") + what + " label '" + label + "'");
    }
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV record; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t j = 0; j < line.size(); ++j) {
    const char ch = line[j];
    if (quoted) {
      if (ch == '"') {
        if (j + 1 < line.size() && line[j + 1] == '"') {
          current.push_back('"');
          ++j;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.emplace_back(was_quoted ? current : std::string(trim(current)));
      current.clear();
      was_quoted = false;
    } else {
      current.push_back(ch);
    }
  }
  fields.emplace_back(was_quoted ? current : std::string(trim(current)));
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(std::string_view text, std::size_t line_no, std::size_t column) {
  text = trim(text);
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  std::ostringstream where;
  where << "line " << line_no << ", column " << column;
  if (text.empty() || ec != std::errc() || ptr != last) {
    throw DataError("cannot parse value '" + std::string(text) + "' at " + where.str());
  }
  if (!std::isfinite(value)) {
    throw DataError("non-finite value '" + std::string(text) + "' at " + where.str());
  }
  return value;
}

// Non-empty lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> read_lines(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    lines.emplace_back(line_no, std::move(line));
  }
  if (in.bad()) throw IoError("failed while reading panel input");
  return lines;
}

PanelData load_wide(std::istream& in) {
  const auto lines = read_lines(in);
  if (lines.empty()) throw DataError("wide-csv input is empty");
  const auto header = split_csv(lines.front().second);
  if (header.empty() || header.front() != "unit") {
    throw DataError("wide-csv header must start with the cell 'unit'");
  }
  std::vector<std::string> times(header.begin() + 1, header.end());
  const auto n_times = times.size();
  std::vector<std::string> units;
  std::vector<double> cells;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& [line_no, text] = lines[r];
    const auto fields = split_csv(text);
    if (fields.size() != n_times + 1) {
      throw DataError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(n_times + 1));
    }
    units.push_back(fields[0]);
    for (std::size_t t = 0; t < n_times; ++t) cells.push_back(parse_real(fields[t + 1], line_no, t + 2));
  }
  Matrix values(static_cast<Eigen::Index>(units.size()), static_cast<Eigen::Index>(n_times));
  for (std::size_t i = 0; i < units.size(); ++i) {
    for (std::size_t t = 0; t < n_times; ++t) values(i, t) = cells[i * n_times + t];
  }
  return PanelData(std::move(values), std::move(units), std::move(times));
}

struct LongRecord {
  std::string unit;
  std::string time;
  std::vector<double> values;
  std::size_t line_no;
};

// Shared grid assembly for long panels and covariates: labels in first-seen
// order unless `units`/`times` are given.
struct LongGrid {
  std::vector<std::string> units;
  std::vector<std::string> times;
  std::vector<Matrix> layers;
};

LongGrid assemble_long(const std::vector<LongRecord>& records, std::size_t dim,
                       const std::vector<std::string>* fixed_units,
                       const std::vector<std::string>* fixed_times) {
  LongGrid grid;
  std::unordered_map<std::string, std::size_t> unit_index;
  std::unordered_map<std::string, std::size_t> time_index;
  auto index_labels = [](const std::vector<std::string>& labels,
                         std::unordered_map<std::string, std::size_t>& index) {
    for (std::size_t j = 0; j < labels.size(); ++j) index.emplace(labels[j], j);
  };
  if (fixed_units) {
    grid.units = *fixed_units;
    index_labels(grid.units, unit_index);
  }
  if (fixed_times) {
    grid.times = *fixed_times;
    index_labels(grid.times, time_index);
  }
  auto lookup = [](const std::string& key, std::unordered_map<std::string, std::size_t>& index,
                   std::vector<std::string>& labels, bool fixed, const char* what,
                   std::size_t line_no) {
    const auto it = index.find(key);
    if (it != index.end()) return it->second;
    if (fixed) {
      throw DataError("unknown " + std::string(what) + " '" + key + "' at line " +
                      std::to_string(line_no));
    }
    index.emplace(key, labels.size());
    labels.push_back(key);
    return labels.size() - 1;
  };
  std::vector<std::tuple<std::size_t, std::size_t, const LongRecord*>> placed;
  placed.reserve(records.size());
  for (const auto& rec : records) {
    const auto i = lookup(rec.unit, unit_index, grid.units, fixed_units != nullptr, "unit", rec.line_no);
    const auto t = lookup(rec.time, time_index, grid.times, fixed_times != nullptr, "time", rec.line_no);
    placed.emplace_back(i, t, &rec);
  }
  const auto n = grid.units.size();
  const auto m = grid.times.size();
  std::vector<const LongRecord*> slot(n * m, nullptr);
  for (const auto& [i, t, rec] : placed) {
    auto& cell = slot[i * m + t];
    if (cell != nullptr) {
      throw DataError("duplicate cell (" + rec->unit + ", " + rec->time + ") at lines " +
                      std::to_string(cell->line_no) + " and " + std::to_string(rec->line_no));
    }
    cell = rec;
  }
  grid.layers.assign(dim, Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < m; ++t) {
      const auto* rec = slot[i * m + t];
      if (rec == nullptr) {
        throw DataError("incomplete grid: missing cell (" + grid.units[i] + ", " + grid.times[t] + ")");
      }
      for (std::size_t d = 0; d < dim; ++d) grid.layers[d](i, t) = rec->values[d];
    }
  }
  return grid;
}

std::vector<LongRecord> read_long_records(const std::vector<std::pair<std::size_t, std::string>>& lines,
                                          std::size_t dim) {
  std::vector<LongRecord> records;
  records.reserve(lines.size());
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& [line_no, text] = lines[r];
    auto fields = split_csv(text);
    if (fields.size() != dim + 2) {
      throw DataError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(dim + 2));
    }
    LongRecord rec{std::move(fields[0]), std::move(fields[1]), {}, line_no};
    for (std::size_t d = 0; d < dim; ++d) rec.values.push_back(parse_real(fields[d + 2], line_no, d + 3));
    records.push_back(std::move(rec));
  }
  return records;
}

PanelData load_long(std::istream& in) {
  const auto lines = read_lines(in);
  if (lines.empty()) throw DataError("long-csv input is empty");
  const auto header = split_csv(lines.front().second);
  if (header != std::vector<std::string>{"unit", "time", "value"}) {
    throw DataError("long-csv header must be 'unit,time,value'");
  }
  auto grid = assemble_long(read_long_records(lines, 1), 1, nullptr, nullptr);
  return PanelData(std::move(grid.layers.front()), std::move(grid.units), std::move(grid.times));
}

PanelData load_json(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid panel JSON: ") + e.what());
  }
  try {
    auto units = doc.at("units").get<std::vector<std::string>>();
    auto times = doc.at("times").get<std::vector<std::string>>();
    const auto& rows = doc.at("values");
    if (!rows.is_array() || rows.size() != units.size()) {
      throw DataError("panel JSON 'values' must hold one row per unit");
    }
    Matrix values(static_cast<Eigen::Index>(units.size()), static_cast<Eigen::Index>(times.size()));
    for (std::size_t i = 0; i < units.size(); ++i) {
      const auto& row = rows[i];
      if (!row.is_array() || row.size() != times.size()) {
        throw DataError("panel JSON row " + std::to_string(i) + " must hold " +
                        std::to_string(times.size()) + " values");
      }
      for (std::size_t t = 0; t < times.size(); ++t) {
        if (!row[t].is_number()) {
          throw DataError("non-numeric value at values[" + std::to_string(i) + "][" + std::to_string(t) + "]");
        }
        values(i, t) = row[t].get<double>();
      }
    }
    return PanelData(std::move(values), std::move(units), std::move(times));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed panel JSON: ") + e.what());
  }
}

}  // namespace

PanelData::PanelData(Matrix values, std::vector<std::string> unit_labels,
                     std::vector<std::string> time_labels)
    : values_(std::move(values)), units_(std::move(unit_labels)), times_(std::move(time_labels)) {
  if (values_.rows() < 2 || values_.cols() < 2) {
    throw DataError("panel must have N >= 2 and T >= 2, got " + std::to_string(values_.rows()) +
                    " x " + std::to_string(values_.cols()));
  }
  if (units_.size() != static_cast<std::size_t>(values_.rows()) ||
      times_.size() != static_cast<std::size_t>(values_.cols())) {
    throw DataError("label counts do not match the panel shape");
  }
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    for (Eigen::Index t = 0; t < values_.cols(); ++t) {
      if (!std::isfinite(values_(i, t))) {
        throw DataError("non-finite value at (" + units_[i] + ", " + times_[t] + ")");
      }
    }
  }
  require_unique(units_, "unit");
  require_unique(times_, "time");
}

PanelData::PanelData(Matrix values)
    : PanelData(values, default_labels('u', values.rows()), default_labels('t', values.cols())) {}

std::vector<double> PanelData::pooled() const { return tailfactor::pooled(values_); }

PanelData PanelData::with_values(Matrix values) const {
  return PanelData(std::move(values), units_, times_);
}

std::vector<double> pooled(const Matrix& values) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(values.size()));
  for (Eigen::Index t = 0; t < values.cols(); ++t) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) out.push_back(values(i, t));
  }
  return out;
}

PanelFormat parse_panel_format(std::string_view name) {
  if (name == "wide-csv" || name == "wide") return PanelFormat::wide_csv;
  if (name == "long-csv" || name == "long") return PanelFormat::long_csv;
  if (name == "json") return PanelFormat::json;
  throw ArgumentError("unknown panel format '" + std::string(name) + "' (expected wide-csv, long-csv or json)");
}

PanelFormat detect_panel_format(const std::string& path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() &&
           path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".json")) return PanelFormat::json;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string header;
  std::getline(in, header);
  if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
  const auto fields = split_csv(header);
  if (fields == std::vector<std::string>{"unit", "time", "value"}) return PanelFormat::long_csv;
  return PanelFormat::wide_csv;
}

PanelData load_panel(std::istream& in, PanelFormat format) {
  switch (format) {
    case PanelFormat::wide_csv: return load_wide(in);
    case PanelFormat::long_csv: return load_long(in);
    case PanelFormat::json: return load_json(in);
  }
  throw ArgumentError("unsupported panel format");
}

PanelData load_panel_file(const std::string& path, PanelFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load_panel(in, format);
}

void save_panel(const PanelData& panel, std::ostream& out, PanelFormat format) {
  const auto& v = panel.values();
  switch (format) {
    case PanelFormat::wide_csv:
      out << "unit";
      for (const auto& t : panel.time_labels()) out << ',' << csv_field(t);
      out << '\n';
      for (Eigen::Index i = 0; i < v.rows(); ++i) {
        out << csv_field(panel.unit_labels()[i]);
        for (Eigen::Index t = 0; t < v.cols(); ++t) out << ',' << format_real(v(i, t));
        out << '\n';
      }
      break;
    case PanelFormat::long_csv:
      out << "unit,time,value\n";
      for (Eigen::Index i = 0; i < v.rows(); ++i) {
        for (Eigen::Index t = 0; t < v.cols(); ++t) {
          out << csv_field(panel.unit_labels()[i]) << ',' << csv_field(panel.time_labels()[t]) << ','
              << format_real(v(i, t)) << '\n';
        }
      }
      break;
    case PanelFormat::json: {
      nlohmann::ordered_json doc;
      doc["units"] = panel.unit_labels();
      doc["times"] = panel.time_labels();
      auto rows = nlohmann::ordered_json::array();
      for (Eigen::Index i = 0; i < v.rows(); ++i) {
        auto row = nlohmann::ordered_json::array();
        for (Eigen::Index t = 0; t < v.cols(); ++t) row.push_back(v(i, t));
        rows.push_back(std::move(row));
      }
      doc["values"] = std::move(rows);
      out << doc.dump() << '\n';
      break;
    }
  }
  if (!out) throw IoError("failed to write panel");
}

Covariates load_covariates(std::istream& in, const PanelData& panel) {
  const auto lines = read_lines(in);
  if (lines.empty()) throw DataError("covariate input is empty");
  const auto header = split_csv(lines.front().second);
  if (header.size() < 3 || header[0] != "unit" || header[1] != "time") {
    throw DataError("covariate header must be 'unit,time,<name1>,...'");
  }
  const auto dim = header.size() - 2;
  auto grid = assemble_long(read_long_records(lines, dim), dim, &panel.unit_labels(), &panel.time_labels());
  Covariates cov;
  cov.names.assign(header.begin() + 2, header.end());
  cov.layers = std::move(grid.layers);
  return cov;
}

void save_covariates(const Covariates& cov, const PanelData& panel, std::ostream& out) {
  out << "unit,time";
  for (const auto& name : cov.names) out << ',' << csv_field(name);
  out << '\n';
  for (std::size_t i = 0; i < panel.n_units(); ++i) {
    for (std::size_t t = 0; t < panel.n_times(); ++t) {
      out << csv_field(panel.unit_labels()[i]) << ',' << csv_field(panel.time_labels()[t]);
      for (const auto& layer : cov.layers) out << ',' << format_real(layer(i, t));
      out << '\n';
    }
  }
  if (!out) throw IoError("failed to write covariates");
}

}  // namespace tailfactor
