#pragma once

#include "swats/harness.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace swats {

/// Experiment file: the JSON form of ExperimentConfig plus an optional
/// `lr_grid` used by tuning.
struct ConfigDocument {
  ExperimentConfig experiment;
  std::vector<double> lr_grid;
};

/// Parses and validates. Throws ConfigError naming the dotted field path on
/// unknown keys, wrong types or out-of-range values.
ConfigDocument parse_config(const nlohmann::json& doc);

/// Reads `path`. Throws std::runtime_error if the file cannot be read and
/// ConfigError if it is not valid JSON or fails validation.
nlohmann::json load_config_json(const std::string& path);

/// Applies `key=value` with a dotted key (`optimizer.beta2=0.99`). The value
/// is read as JSON when it parses, else as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace swats
