#include "pipeline/pipeline.hpp"

#include <nlohmann/json.hpp>
#include <sstream>

#include "common/error.hpp"
#include "volgrid/ops.hpp"

namespace vr::pipeline {

recon::ReconnectionOutput reconnect(const Volume& vol, const Volume& mask, const PipelineConfig& config,
                                    const Volume* gt) {
    require_same_dims(vol, mask, "reconnect");
    if (gt) require_same_dims(mask, *gt, "reconnect ground truth");
    return recon::run_reconnection(mask, vol, nullptr, config.reconnect, gt);
}

ReconstructOutput reconstruct(const Volume& vol, const Volume& refined,
                              const std::vector<skel::CenterlineBranch>& centerlines, const PipelineConfig& config,
                              bool with_mesh) {
    require_same_dims(vol, refined, "reconstruct");
    if (config.sdf_oracle != "threshold") fail(ErrorCode::ConfigInvalid, "unknown sdf oracle: " + config.sdf_oracle);
    ReconstructOutput out;
    out.reconstructed = Volume::like(refined, VolumeKind::BinaryMask);
    const lumen::ThresholdSdfOracle oracle;
    for (const auto& cl : centerlines) {
        std::vector<VoxelCoord> pts;
        for (const auto& p : cl.points) {
            if (!vol.contains(p)) fail(ErrorCode::InvalidArgument, "centerline point outside the volume");
            if (pts.empty() || pts.back() != p) pts.push_back(p);
        }
        if (pts.size() < 2) continue;
        auto stations = lumen::contour_pipeline(pts, vol, oracle, config.contour);
        const auto model = ies::build_tube_model(stations, config.tube);
        ies::voxelize_into(out.reconstructed, model);
        if (with_mesh) {
            auto tris = ies::surface_mesh(model, vol.dims(), vol.spacing());
            out.mesh.insert(out.mesh.end(), tris.begin(), tris.end());
        }
        out.contours.push_back(std::move(stations));
        ++out.tubes;
    }
    out.final_mask = ies::merge(out.reconstructed, refined.thresholded(0.5f));
    return out;
}

std::vector<skel::CenterlineBranch> centerlines_from_jsonl(const std::string& text) {
    std::vector<skel::CenterlineBranch> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto& pts = j.contains("centerline") ? j.at("centerline") : j.at("points");
            skel::CenterlineBranch b;
            b.id = static_cast<int>(out.size());
            for (const auto& p : pts) {
                if (!p.is_array() || p.size() != 3) fail(ErrorCode::InvalidArgument, "bad point");
                b.points.push_back({p[0].get<int>(), p[1].get<int>(), p[2].get<int>()});
            }
            skel::update_tangents(b);
            out.push_back(std::move(b));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::InvalidArgument, "centerline line " + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            fail(ErrorCode::InvalidArgument, "centerline line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

topo::MetricReport evaluate_metrics(const Volume& pred_in, const Volume& gt_in, const PipelineConfig& config,
                                    const std::vector<skel::CenterlineBranch>* reference,
                                    const topo::ReconnectionCounts* counts) {
    require_same_dims(pred_in, gt_in, "metrics");
    const Volume pred = pred_in.thresholded(0.5f);
    const Volume gt = gt_in.thresholded(0.5f);
    const auto& m = config.metrics;
    topo::MetricReport r;
    r.dice = topo::dice(pred, gt);
    r.hd95_mm = topo::hd95(pred, gt);
    r.l_dscl = topo::nsdt_soft_cldice(gt, pred.with_kind(VolumeKind::Probability), m.R, m.soft_iters);
    r.joint_loss = topo::joint_loss(gt, pred.with_kind(VolumeKind::Probability), m.alpha, m.R, m.soft_iters);
    if (reference) {
        std::vector<skel::CenterlineBranch> extracted;
        if (pred.count_nonzero() > 0) {
            const auto skel = skel::skeletonize_hard(pred, {}, config.reconnect.spur_length);
            extracted = skel::extract_branches(skel, connected_components(pred), 1);
        }
        r.ov = topo::overlap_ov(*reference, extracted, m.ov_tolerance);
    }
    if (counts) {
        const auto rm = topo::rec_metrics(*counts);
        r.rec_acc = rm.rec_acc;
        r.rec_sen = rm.rec_sen;
        r.rec_spe = rm.rec_spe;
    }
    return r;
}

}  // namespace vr::pipeline
