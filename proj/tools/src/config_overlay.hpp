#pragma once

#include <string>
#include <vector>

#include <CLI11.hpp>

namespace tailfactor::cli {

/// Fills options from a flat JSON object after command-line parsing.
/// Keys are the long flag names without dashes; an option given on the
/// command line keeps its value, and a key with no matching option is an
/// ArgumentError.
class ConfigOverlay {
 public:
  explicit ConfigOverlay(CLI::App& app) : app_(app) {}

  void bind(CLI::Option* option);
  /// Binds every option of the subcommand that has a long name, except
  /// --config itself and --help.
  void bind_all();
  void apply(const std::string& path);

 private:
  CLI::App& app_;
  std::vector<CLI::Option*> options_;
};

}  // namespace tailfactor::cli
