#include <algorithm>
#include <cmath>
#include <limits>

#include "reconnect/reconnect.hpp"

namespace vr::recon {

namespace {

skel::CenterlineBranch oriented(const skel::CenterlineBranch& b, bool at_head) {
    skel::CenterlineBranch out = b;
    if (!at_head) {
        std::reverse(out.points.begin(), out.points.end());
        skel::update_tangents(out);
    }
    return out;
}

double nearest_between(const skel::CenterlineBranch& a, const skel::CenterlineBranch& b) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : a.points)
        for (const auto& q : b.points) best = std::min(best, distance(p, q));
    return best;
}

std::size_t nearest_index(const skel::CenterlineBranch& b, const VoxelCoord& e) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < b.points.size(); ++i) {
        const double d = distance(b.points[i], e);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

// Endpoint pair geometry shared by types 1 and 2.
CandidatePair end_pair(const skel::CenterlineBranch& src, int si, const OpeningPoint& so,
                       const skel::CenterlineBranch& cand, int ci, const OpeningPoint& co, ReconnectionType type,
                       double nearest) {
    CandidatePair p;
    p.disconnected = oriented(src, so.at_head);
    p.candidate = oriented(cand, co.at_head);
    p.rtype = type;
    p.nearest_distance = nearest;
    p.disconnected_index = si;
    p.candidate_index = ci;
    p.target = p.candidate.head();
    const Vec3& t_e = p.disconnected.head_tangent;
    const Vec3& t_m = p.candidate.head_tangent;
    p.proximal_angle = angle_deg(t_m, -t_e);
    const Vec3 v = p.start().vec() - p.target.vec();
    p.positional_cosines = {cosine(v, t_m), cosine(v, -t_e)};
    return p;
}

bool type3_length_gate(const skel::CenterlineBranch& src, double nearest, const SelectionParams& params) {
    const auto len = static_cast<int>(src.length());
    if (len > params.type3_long_length) return nearest <= params.type3_long_distance;
    if (len > params.type3_min_length) return nearest <= params.type3_short_distance;
    return false;
}

}  // namespace

std::vector<OpeningPoint> opening_points(const std::vector<skel::CenterlineBranch>& branches,
                                         const skel::Skeleton& skel, int patch) {
    std::vector<OpeningPoint> out;
    for (std::size_t b = 0; b < branches.size(); ++b) {
        const auto& br = branches[b];
        for (const auto& c : skel::detect_opening_points(br, skel, patch)) {
            if (c == br.head())
                out.push_back({int(b), true});
            else if (c == br.tail())
                out.push_back({int(b), false});
        }
    }
    return out;
}

bool type3_gate(const CandidatePair& pair, const SelectionParams& params) {
    const auto& cand = pair.candidate;
    if (cand.points.empty()) return false;
    const std::size_t m = nearest_index(cand, pair.start());
    const auto margin = static_cast<std::size_t>(std::max(0, params.type3_end_margin));
    if (m < margin || m + margin >= cand.points.size()) return false;
    const Vec3 to_attach = cand.points[m].vec() - pair.start().vec();
    if (to_attach.norm() == 0.0) return true;
    return angle_deg(pair.disconnected.head_tangent, to_attach) < params.type3_max_positional_angle;
}

std::vector<CandidatePair> select_candidates_of_type(const std::vector<skel::CenterlineBranch>& branches,
                                                     const std::vector<OpeningPoint>& openings,
                                                     const std::vector<int>& sources, ReconnectionType type,
                                                     const SelectionParams& params) {
    std::vector<CandidatePair> out;
    for (int si : sources) {
        const auto& src = branches[static_cast<std::size_t>(si)];
        std::vector<CandidatePair> found;
        for (const auto& so : openings) {
            if (so.branch != si) continue;
            for (std::size_t ci = 0; ci < branches.size(); ++ci) {
                const auto& cand = branches[ci];
                if (int(ci) == si) continue;
                if (type == ReconnectionType::SmallVesselMerge &&
                    (cand.is_connected_tree || cand.component_id == src.component_id))
                    continue;
                if (type != ReconnectionType::SmallVesselMerge && !cand.is_connected_tree) continue;
                const double nearest = nearest_between(src, cand);
                if (type == ReconnectionType::BranchOccurrence) {
                    if (!type3_length_gate(src, nearest, params)) continue;
                    CandidatePair p;
                    p.disconnected = oriented(src, so.at_head);
                    p.candidate = cand;
                    p.rtype = type;
                    p.nearest_distance = nearest;
                    p.disconnected_index = si;
                    p.candidate_index = int(ci);
                    p.target = cand.points[nearest_index(cand, p.start())];
                    const Vec3 v = p.target.vec() - p.start().vec();
                    p.proximal_angle = angle_deg(cand.head_tangent, -p.disconnected.head_tangent);
                    p.positional_cosines = {cosine(v, p.disconnected.head_tangent), 0.0};
                    if (type3_gate(p, params)) found.push_back(std::move(p));
                    continue;
                }
                const double max_d = type == ReconnectionType::SmallVesselMerge ? params.type1_max_distance
                                                                                : params.type2_max_distance;
                if (!(nearest < max_d)) continue;
                for (const auto& co : openings) {
                    if (co.branch != int(ci)) continue;
                    auto p = end_pair(src, si, so, cand, int(ci), co, type, nearest);
                    if (!(p.proximal_angle < params.max_proximal_angle)) continue;
                    if (type == ReconnectionType::EndReconnection) {
                        const double sum = p.positional_cosines[0] + p.positional_cosines[1];
                        const double bound =
                            std::min(params.positional_cos_cap, 2.0 * std::cos(p.proximal_angle * kPi / 180.0));
                        if (!(sum > bound)) continue;
                    }
                    found.push_back(std::move(p));
                }
            }
        }
        std::stable_sort(found.begin(), found.end(), [](const CandidatePair& a, const CandidatePair& b) {
            if (a.nearest_distance != b.nearest_distance) return a.nearest_distance < b.nearest_distance;
            const double da = distance(a.start(), a.target), db = distance(b.start(), b.target);
            if (da != db) return da < db;
            return a.candidate_index < b.candidate_index;
        });
        if (found.size() > static_cast<std::size_t>(std::max(0, params.max_pairs_per_branch)))
            found.resize(static_cast<std::size_t>(std::max(0, params.max_pairs_per_branch)));
        for (auto& p : found) out.push_back(std::move(p));
    }
    return out;
}

std::vector<CandidatePair> select_candidates(const std::vector<skel::CenterlineBranch>& branches,
                                             const skel::Skeleton& skel, const SelectionParams& params) {
    const auto openings = opening_points(branches, skel, params.opening_patch);
    std::vector<int> sources;
    for (std::size_t b = 0; b < branches.size(); ++b)
        if (!branches[b].is_connected_tree) sources.push_back(int(b));
    std::vector<CandidatePair> out;
    for (auto t : {ReconnectionType::SmallVesselMerge, ReconnectionType::EndReconnection,
                   ReconnectionType::BranchOccurrence}) {
        auto part = select_candidates_of_type(branches, openings, sources, t, params);
        for (auto& p : part) out.push_back(std::move(p));
    }
    return out;
}

}  // namespace vr::recon
