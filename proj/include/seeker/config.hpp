#pragma once

// JSON scenario files. Every key is checked: unknown keys, missing required
// keys and out-of-range values are reported with their key path.

#include "seeker/reward.hpp"
#include "seeker/sim.hpp"

#include <string>

namespace seeker::config {

struct Config {
    sim::Scenario scenario;
    reward::RewardConfig reward;
    std::size_t mc_trials = 20;
};

/// Parses and validates configuration text.
Config parse_config(const std::string& text);
Config load_config(const std::string& path);

/// Resolves "case1" style names against the shipped config directory;
/// anything containing a path separator or ".json" is used verbatim.
std::string resolve_config_path(const std::string& name_or_path);

}  // namespace seeker::config
