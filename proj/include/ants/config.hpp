#pragma once

#include <json.hpp>

#include "ants/pipeline.hpp"

namespace ants {

// JSON mirror of PipelineConfig:
//
// {
//   "score":      {"temperature": 0.01, "group_size": 100, "lambda_override": null},
//   "mining":     {"initial_threshold": 0.9, "selection_ratio": 0.5, "class_ratio": 0.08,
//                  "cache_capacity": 20000},
//   "generation": {"ens_prompt": "...", "vsnl_prompt": "...", "len_min": 3, "len_max": 15,
//                  "attempts": 3, "fanout": 4},
//   "negatives": 10000, "regen_every": 1, "mode": "adaptive",
//   "include_current_batch": true, "lambda_ema": 0.0, "adapt": true, "seed": 0
// }
//
// Missing keys keep the value from `base`; unknown keys are rejected.

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});

} // namespace ants
