#ifndef EAPO_CONFIG_HPP_
#define EAPO_CONFIG_HPP_

#include <filesystem>
#include <string>

#include "eapo/settings.hpp"

namespace eapo {

// YAML run configuration with four optional sections: plant, env, trainer,
// eval. Keys inside `plant` are exactly the PlantParams field names. Missing
// keys keep their defaults; unknown keys and bad values throw ConfigError
// naming "section.key".
RunConfig parse_config(const std::string& yaml_text);
RunConfig load_config(const std::filesystem::path& path);

// Fully resolved configuration (every key, defaults filled in).
std::string dump_config(const RunConfig& config);

}  // namespace eapo

#endif  // EAPO_CONFIG_HPP_
