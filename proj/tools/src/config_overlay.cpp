#include "config_overlay.hpp"

#include <fstream>

#include <json.hpp>

#include "tailfactor/error.hpp"

namespace tailfactor::cli {

namespace {

std::string scalar_text(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return v.dump();
  throw ArgumentError("config key '" + key + "' must be a string, number or boolean");
}

}  // namespace

void ConfigOverlay::bind(CLI::Option* option) { options_.push_back(option); }

void ConfigOverlay::bind_all() {
  for (CLI::Option* opt : app_.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "config" || name == "help") continue;
    bind(opt);
  }
}

void ConfigOverlay::apply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError("config file '" + path + "': " + e.what());
  }
  if (!doc.is_object()) throw ArgumentError("config file '" + path + "' must hold a JSON object");

  for (const auto& [key, value] : doc.items()) {
    CLI::Option* target = nullptr;
    for (CLI::Option* opt : options_) {
      if (opt->check_lname(key)) target = opt;
    }
    if (target == nullptr) throw ArgumentError("unknown config key '" + key + "'");
    if (target->count() > 0) continue;
    target->clear();
    if (value.is_array()) {
      for (const auto& item : value) target->add_result(scalar_text(item, key));
    } else {
      target->add_result(scalar_text(value, key));
    }
    try {
      target->run_callback();
    } catch (const CLI::Error& e) {
      throw ArgumentError("config key '" + key + "': " + e.what());
    }
  }
}

}  // namespace tailfactor::cli
