#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "tailfactor/config.hpp"

namespace tailfactor {

/// An N x T panel of finite observations Y(i, t) with unit and time labels.
/// Immutable once constructed; the constructor enforces N, T >= 2, finite
/// entries and duplicate-free labels.
class PanelData {
 public:
  PanelData(Matrix values, std::vector<std::string> unit_labels,
            std::vector<std::string> time_labels);

  /// Labels default to "u1".."uN" and "t1".."tT".
  explicit PanelData(Matrix values);

  const Matrix& values() const noexcept { return values_; }
  const std::vector<std::string>& unit_labels() const noexcept { return units_; }
  const std::vector<std::string>& time_labels() const noexcept { return times_; }
  std::size_t n_units() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t n_times() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  std::size_t n_cells() const noexcept { return n_units() * n_times(); }

  /// Cells in time-major order: all units at t = 1, then t = 2, ...
  std::vector<double> pooled() const;

  /// Same labels, new values (which must match the shape).
  PanelData with_values(Matrix values) const;

 private:
  Matrix values_;
  std::vector<std::string> units_;
  std::vector<std::string> times_;
};

/// Time-major flattening of any N x T matrix.
std::vector<double> pooled(const Matrix& values);

enum class PanelFormat { wide_csv, long_csv, json };

PanelFormat parse_panel_format(std::string_view name);
/// Picks a format from the file extension and, for CSV, the header line.
PanelFormat detect_panel_format(const std::string& path);

/// wide-csv: header "unit,<time labels...>", one row per unit.
/// long-csv: header "unit,time,value", one row per cell, any order.
/// json: {"units": [...], "times": [...], "values": [[...], ...]} (N x T).
PanelData load_panel(std::istream& in, PanelFormat format);
PanelData load_panel_file(const std::string& path, PanelFormat format);

/// Reals are written with 17 significant digits so that reloading is exact.
void save_panel(const PanelData& panel, std::ostream& out, PanelFormat format);

/// N x T x d covariate array stored as d N x T layers.
struct Covariates {
  std::vector<std::string> names;
  std::vector<Matrix> layers;

  std::size_t dim() const noexcept { return layers.size(); }
};

/// CSV with header "unit,time,<name1>,...,<named>" covering the complete
/// grid of `panel`'s labels, rows in any order.
Covariates load_covariates(std::istream& in, const PanelData& panel);
void save_covariates(const Covariates& cov, const PanelData& panel, std::ostream& out);

}  // namespace tailfactor
