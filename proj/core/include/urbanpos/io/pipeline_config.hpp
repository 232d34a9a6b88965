#pragma once

#include <string>
#include <string_view>

#include "urbanpos/mode_switch.hpp"

namespace urbanpos::io {

/// {"filter": {...}, "position": {...}, "alpha": a, "consistency_check": b,
///  "known_start": {"pos": [x, y, z], "sigma": s}}. Every key is optional;
/// unknown keys are rejected. Throws ConfigInvalid.
PipelineConfig parse_pipeline_config(std::string_view json_text);
std::string dump_pipeline_config(const PipelineConfig& cfg);

}  // namespace urbanpos::io
