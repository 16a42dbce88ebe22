#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ies/ies.hpp"
#include "pipeline/config.hpp"
#include "reconnect/reconnect.hpp"
#include "topometrics/topometrics.hpp"

namespace vr::pipeline {

recon::ReconnectionOutput reconnect(const Volume& vol, const Volume& mask, const PipelineConfig& config,
                                    const Volume* gt = nullptr);

struct ReconstructOutput {
    Volume reconstructed;  // union of the voxelized tube models
    Volume final_mask;     // reconstructed merged with the refined mask
    std::vector<std::vector<lumen::StationContour>> contours;
    std::vector<ies::Triangle> mesh;
    int tubes = 0;
};

// One tube model per centerline with at least two distinct points.
ReconstructOutput reconstruct(const Volume& vol, const Volume& refined,
                              const std::vector<skel::CenterlineBranch>& centerlines, const PipelineConfig& config,
                              bool with_mesh = false);

// Reads stitch lines ("centerline") or branch lines ("points").
std::vector<skel::CenterlineBranch> centerlines_from_jsonl(const std::string& text);

// Dice, HD95 and the soft-clDice losses; OV when reference centerlines are
// given (the prediction's centerlines come from its own skeleton);
// reconnection metrics when counts are given.
topo::MetricReport evaluate_metrics(const Volume& pred, const Volume& gt, const PipelineConfig& config,
                                    const std::vector<skel::CenterlineBranch>* reference = nullptr,
                                    const topo::ReconnectionCounts* counts = nullptr);

}  // namespace vr::pipeline
