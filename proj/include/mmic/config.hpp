#pragma once

#include "mmic/simulation.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mmic {

/// Flat `key = value` text; keys are dotted (`data.mm`), optionally grouped
/// under `[section]` headers, `#` starts a comment. Unknown keys and range
/// violations are rejected with every offending key listed.
SimConfig parse_config_text(const std::string& text);
SimConfig parse_config(const std::string& path);

/// Canonical text for a config: every key, in a fixed order, one per line.
/// parse_config_text(emit_config(c)) reproduces c, and emitting that again
/// reproduces the same bytes.
std::string emit_config(const SimConfig& config);

/// Set one key from its text value. Throws ConfigError on unknown key or bad value.
void apply_override(SimConfig& config, const std::string& key, const std::string& value);

/// Parse "key=value".
std::pair<std::string, std::string> split_override(const std::string& kv);

struct ConfigKeyInfo {
    std::string key;
    std::string default_value;
    std::string help;
};

/// All keys with their defaults, in emit order.
std::vector<ConfigKeyInfo> config_keys();

bool operator==(const SimConfig& a, const SimConfig& b);

} // namespace mmic
