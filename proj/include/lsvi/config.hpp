#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "lsvi/harness.hpp"

namespace lsvi {

/// Fully materialized default configuration (practical mode, simplex env).
nlohmann::json default_config();

/// Fills every missing field of a user config. Mode-dependent defaults
/// (multipliers, lambda) follow agent.mode; dimensions of file environments
/// are read from the file.
nlohmann::json materialize_config(const nlohmann::json& user);

/// Applies dotted-path key=value overrides. Keys must name a field of the
/// materialized schema and values must parse as that field's type. Throws
/// std::invalid_argument (listing valid keys or the expected type) and leaves
/// the input untouched on error.
nlohmann::json apply_overrides(const nlohmann::json& config,
                               const std::vector<std::string>& overrides);

/// All dotted leaf paths of the schema, sorted.
std::vector<std::string> config_keys();

RunConfig run_config_from_json(const nlohmann::json& materialized);

nlohmann::json load_json_file(const std::string& path);

}  // namespace lsvi
