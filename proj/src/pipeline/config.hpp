#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "ies/ies.hpp"
#include "lumen/lumen.hpp"
#include "reconnect/reconnect.hpp"

namespace vr::pipeline {

struct MetricParams {
    double R = 5.0;
    double alpha = 0.5;
    int soft_iters = 10;
    double ov_tolerance = 1.0;
};

struct PipelineConfig {
    recon::ReconnectParams reconnect;
    lumen::ContourParams contour;
    lumen::SamplingPolicy sampling;
    std::string sdf_oracle = "threshold";
    ies::TubeParams tube;
    MetricParams metrics;
};

nlohmann::ordered_json config_to_json(const PipelineConfig& config);
std::string config_to_string(const PipelineConfig& config);

// Starts from the defaults; every key must be known and correctly typed.
// Throws ConfigInvalid.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig config_from_string(const std::string& text);
PipelineConfig load_config(const std::string& path);

// "a.b.c=value": the value is parsed as JSON when possible, otherwise taken
// as a string. The key path must exist in the serialized config.
void apply_override(nlohmann::ordered_json& j, const std::string& assignment);
PipelineConfig with_overrides(const PipelineConfig& base, const std::vector<std::string>& assignments);

}  // namespace vr::pipeline
