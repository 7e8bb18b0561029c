#pragma once

#include "rummage/sim.hpp"

#include <stdexcept>
#include <string>

namespace rummage {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Reads a JSON scenario. Every key is optional and falls back to
/// mug_scenario(); unknown keys are rejected.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text);

}  // namespace rummage
