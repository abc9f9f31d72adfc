#pragma once

#include "json.hpp"

#include "phalanx/synthetic.hpp"

namespace phalanx::detail {

// Shared between the synthetic-config and run-config loaders; unknown keys
// are rejected, omitted ones keep their defaults.
SynthConfig synth_config_from_json(const nlohmann::json& doc);

}  // namespace phalanx::detail
