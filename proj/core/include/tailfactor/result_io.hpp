#pragma once

#include <iosfwd>
#include <string>

#include "tailfactor/eot.hpp"
#include "tailfactor/evt.hpp"
#include "tailfactor/ftvm.hpp"
#include "tailfactor/selection.hpp"

namespace tailfactor {

/// JSON documents with "schema_version": 1 and a "kind" tag; matrices are
/// arrays of rows, reals are written in shortest round-trip form. See
/// docs/result_schema.md.
void save_result(const FitResult& result, std::ostream& out);
void save_result(const EoTResult& result, std::ostream& out);
FitResult load_fit_result(std::istream& in);
EoTResult load_eot_result(std::istream& in);

std::string to_json(const TailEstimates& tail);
std::string to_json(const KsReport& report);
std::string to_json(const IcReport& report);
std::string to_json(const Selection& selection);

/// Writes `content` to `path` through a temporary file in the same
/// directory and a rename, so readers never see a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace tailfactor
