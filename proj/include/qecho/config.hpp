#pragma once

// Run configuration: JSON documents overlaid on per-experiment defaults.
// Every accepted key appears in the defaults; anything else is a config error.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace qecho::config {

using json = nlohmann::json;

const std::vector<std::string>& experiment_names();
json defaults(const std::string& experiment);

// Objects merge key by key; arrays and scalars replace. Numbers may replace
// numbers of either kind, any other type change is rejected.
json merge(const json& base, const json& overlay, const std::string& path = "");

// "a.b.c=value". The value is parsed as JSON when it parses, else taken as a string.
void apply_override(json& config, const std::string& assignment);

json load_file(const std::filesystem::path& path);

// Full config for one run: defaults, then the file (may be null), then overrides.
json resolve(const std::string& experiment, const json& file, const std::vector<std::string>& overrides);

// Key of the canonical config text.
std::string hash(const json& config);

}  // namespace qecho::config
