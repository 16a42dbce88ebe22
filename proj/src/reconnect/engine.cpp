#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "common/error.hpp"
#include "reconnect/reconnect.hpp"
#include "volgrid/ops.hpp"

namespace vr::recon {

namespace {

struct Groups {
    std::vector<int> parent;
    std::vector<bool> connected;

    explicit Groups(int n) : parent(static_cast<std::size_t>(n)), connected(static_cast<std::size_t>(n), false) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent[static_cast<std::size_t>(b)] = a;
        connected[static_cast<std::size_t>(a)] = connected[static_cast<std::size_t>(a)] || connected[static_cast<std::size_t>(b)];
    }
    bool is_connected(int x) { return connected[static_cast<std::size_t>(find(x))]; }
    void connect(int x) { connected[static_cast<std::size_t>(find(x))] = true; }
};

std::vector<VoxelCoord> concat_unique(std::initializer_list<const std::vector<VoxelCoord>*> parts) {
    std::vector<VoxelCoord> out;
    for (const auto* part : parts)
        for (const auto& c : *part)
            if (out.empty() || out.back() != c) out.push_back(c);
    return out;
}

std::unique_ptr<ProbabilityOracle> build_oracle(const Volume& mask, const Volume& vol, const skel::Skeleton& skel,
                                                const LabeledComponents& comps, const ReconnectParams& params) {
    if (params.oracle_kind == "percentile") return std::make_unique<PercentileOracle>(vol);
    if (params.oracle_kind != "linear") fail(ErrorCode::ConfigInvalid, "unknown oracle kind: " + params.oracle_kind);
    Volume tree = Volume::like(mask, VolumeKind::BinaryMask);
    Volume tree_cl = Volume::like(mask, VolumeKind::BinaryMask);
    bool any = false;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const int l = comps.labels[i];
        if (l < 1 || l > params.tree_components) continue;
        tree.data()[i] = 1.0f;
        if (skel.mask.data()[i] > 0.5f) {
            tree_cl.data()[i] = 1.0f;
            any = true;
        }
    }
    if (!any) return std::make_unique<PercentileOracle>(vol);
    auto oracle = std::make_unique<LinearPatchOracle>(params.oracle);
    oracle->fit(vol, tree, tree_cl);
    return oracle;
}

}  // namespace

ReconnectionOutput run_reconnection(const Volume& mask_in, const Volume& vol, const ProbabilityOracle* oracle,
                                    const ReconnectParams& params, const Volume* gt_mask) {
    require_same_dims(mask_in, vol, "reconnection");
    if (gt_mask) require_same_dims(mask_in, *gt_mask, "reconnection ground truth");
    if (params.tree_components < 1) fail(ErrorCode::InvalidArgument, "tree_components must be at least 1");
    const Volume mask = mask_in.thresholded(0.5f);
    ReconnectionOutput out;
    out.refined = mask;

    const auto skel = skel::skeletonize_hard(mask, {}, params.spur_length);
    const auto comps = connected_components(mask);
    auto branches = skel::extract_branches(skel, comps, params.tree_components);
    const int ncomp = comps.count();
    for (int l = params.tree_components + 1; l <= ncomp; ++l) ++out.report.disconnected_components;

    std::unique_ptr<ProbabilityOracle> owned;
    if (!oracle && out.report.disconnected_components > 0) {
        owned = build_oracle(mask, vol, skel, comps, params);
        oracle = owned.get();
    }

    Groups groups(ncomp + 1);
    for (int l = 1; l <= std::min(ncomp, params.tree_components); ++l) groups.connect(l);

    auto openings = opening_points(branches, skel, params.selection.opening_patch);
    std::vector<std::uint8_t> blocked(mask.size(), 0);
    std::vector<int> stitches_of_component(static_cast<std::size_t>(ncomp + 1), 0);
    std::vector<std::vector<std::size_t>> stitch_components;

    auto working = [&]() {
        std::vector<skel::CenterlineBranch> w = branches;
        for (auto& b : w) {
            if (b.component_id <= 0) continue;
            b.is_connected_tree = groups.is_connected(b.component_id);
            b.component_id = groups.find(b.component_id);
        }
        return w;
    };

    auto run_pass = [&](ReconnectionType type) {
        if (!oracle) return;
        const auto w = working();
        std::vector<int> sources;
        for (std::size_t b = 0; b < w.size(); ++b)
            if (!w[b].is_connected_tree && w[b].component_id > 0) sources.push_back(int(b));
        auto pairs = select_candidates_of_type(w, openings, sources, type, params.selection);
        std::stable_sort(pairs.begin(), pairs.end(), [](const CandidatePair& a, const CandidatePair& b) {
            if (a.nearest_distance != b.nearest_distance) return a.nearest_distance < b.nearest_distance;
            if (a.disconnected_index != b.disconnected_index) return a.disconnected_index < b.disconnected_index;
            return a.candidate_index < b.candidate_index;
        });
        const CachedOracle p(*oracle, vol);
        for (const auto& pair : pairs) {
            const auto& src = branches[static_cast<std::size_t>(pair.disconnected_index)];
            const auto& cand = branches[static_cast<std::size_t>(pair.candidate_index)];
            PairReport rep;
            rep.rtype = type;
            rep.disconnected = src.id;
            rep.candidate = cand.id;
            rep.nearest_distance = pair.nearest_distance;
            rep.proximal_angle = pair.proximal_angle;
            const bool src_at_head = pair.start() == src.head();
            auto used = [&](int branch, bool at_head) {
                return std::none_of(openings.begin(), openings.end(), [&](const OpeningPoint& o) {
                    return o.branch == branch && o.at_head == at_head;
                });
            };
            bool skip = used(pair.disconnected_index, src_at_head) || groups.is_connected(src.component_id);
            bool cand_at_head = true;
            if (type == ReconnectionType::SmallVesselMerge) {
                cand_at_head = pair.target == cand.head();
                skip = skip || used(pair.candidate_index, cand_at_head) ||
                       groups.find(src.component_id) == groups.find(cand.component_id);
            } else if (type == ReconnectionType::EndReconnection) {
                cand_at_head = pair.target == cand.head();
                skip = skip || used(pair.candidate_index, cand_at_head);
            }
            if (skip) {
                out.report.pairs.push_back(rep);
                continue;
            }
            rep.attempted = true;
            const auto result = walk(pair, p, params.walk, blocked);
            rep.reached = result.reached;
            rep.path_length = static_cast<int>(result.path.size());
            rep.evaluation = evaluate_reconnection(result, pair, p, params.evaluation);
            out.report.pairs.push_back(rep);
            if (rep.evaluation.verdict != Verdict::Accept) continue;

            Stitch st;
            st.rtype = type;
            st.disconnected = src.id;
            st.candidate = cand.id;
            st.path = densify(result.path);
            const auto head = disconnected_segment(pair, params.evaluation.extension);
            const auto tail = candidate_segment(pair, st.path.back(), params.evaluation.extension);
            st.centerline.id = static_cast<int>(out.stitches.size());
            st.centerline.points = concat_unique({&head, &st.path, &tail});
            st.centerline.component_id = src.component_id;
            st.centerline.is_connected_tree = true;
            skel::update_tangents(st.centerline);
            for (const auto& c : st.path) blocked[mask.index(c)] = 1;

            std::erase_if(openings, [&](const OpeningPoint& o) {
                if (o.branch == pair.disconnected_index && o.at_head == src_at_head) return true;
                return type != ReconnectionType::BranchOccurrence && o.branch == pair.candidate_index &&
                       o.at_head == cand_at_head;
            });
            std::vector<std::size_t> touched{static_cast<std::size_t>(src.component_id)};
            if (type == ReconnectionType::SmallVesselMerge) {
                groups.unite(src.component_id, cand.component_id);
                touched.push_back(static_cast<std::size_t>(cand.component_id));
            } else {
                groups.connect(src.component_id);
            }
            stitch_components.push_back(touched);
            out.stitches.push_back(std::move(st));
        }
    };

    if (params.pass1) run_pass(ReconnectionType::SmallVesselMerge);
    if (params.pass2) run_pass(ReconnectionType::EndReconnection);
    if (params.pass3) run_pass(ReconnectionType::BranchOccurrence);

    std::vector<bool> keep(static_cast<std::size_t>(ncomp + 1), true);
    for (int l = params.tree_components + 1; l <= ncomp; ++l)
        if (!groups.is_connected(l)) {
            keep[static_cast<std::size_t>(l)] = false;
            ++out.report.removed_components;
        }
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const int l = comps.labels[i];
        if (l > 0 && !keep[static_cast<std::size_t>(l)]) {
            out.refined.data()[i] = 0.0f;
            ++out.report.removed_voxels;
        }
    }
    for (const auto& b : branches)
        if (b.component_id > 0 && keep[static_cast<std::size_t>(b.component_id)]) out.branches.push_back(b);

    if (gt_mask) {
        const Volume gt = gt_mask->thresholded(0.5f);
        const Volume near_gt = dilate(gt, 1);
        std::vector<std::size_t> inside(static_cast<std::size_t>(ncomp + 1), 0);
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (comps.labels[i] > 0 && gt.data()[i] > 0.5f) ++inside[static_cast<std::size_t>(comps.labels[i])];
        std::vector<int> own(static_cast<std::size_t>(ncomp + 1), 0);  // 0 none, 1 valid, 2 invalid
        for (std::size_t s = 0; s < out.stitches.size(); ++s) {
            const bool valid = std::all_of(out.stitches[s].path.begin(), out.stitches[s].path.end(),
                                           [&](const VoxelCoord& c) { return near_gt.at(c) > 0.5f; });
            for (auto l : stitch_components[s]) own[l] = std::max(own[l], valid ? 1 : 2);
        }
        topo::ReconnectionCounts counts;
        for (int l = params.tree_components + 1; l <= ncomp; ++l) {
            const auto ul = static_cast<std::size_t>(l);
            const bool should = 2 * inside[ul] > comps.sizes[ul - 1];
            if (keep[ul]) {
                if (own[ul] == 2)
                    ++counts.fp_s;
                else if (own[ul] == 1)
                    ++(should ? counts.tp_s : counts.fp_s);
                else
                    ++(should ? counts.tp_b : counts.fp_b);
            } else {
                ++(should ? counts.fn_b : counts.tn_b);
            }
        }
        out.report.counts = counts;
    }
    return out;
}

std::string report_json(const ReconnectionReport& report) {
    auto num = [](double v) -> nlohmann::ordered_json {
        if (!std::isfinite(v)) return nullptr;
        return v;
    };
    nlohmann::ordered_json j;
    j["disconnected_components"] = report.disconnected_components;
    j["removed_components"] = report.removed_components;
    j["removed_voxels"] = report.removed_voxels;
    nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
    for (const auto& p : report.pairs) {
        nlohmann::ordered_json e;
        e["rtype"] = static_cast<int>(p.rtype);
        e["disconnected"] = p.disconnected;
        e["candidate"] = p.candidate;
        e["nearest_distance"] = num(p.nearest_distance);
        e["proximal_angle"] = num(p.proximal_angle);
        e["attempted"] = p.attempted;
        e["reached"] = p.reached;
        e["path_length"] = p.path_length;
        e["score"] = num(p.evaluation.score);
        e["p_penalty"] = num(p.evaluation.p_penalty);
        e["gray_penalty"] = num(p.evaluation.gray_penalty);
        e["verdict"] = p.evaluation.verdict == Verdict::Accept ? "accept" : "reject";
        pairs.push_back(e);
    }
    j["pairs"] = pairs;
    if (report.counts) {
        const auto& c = *report.counts;
        const auto m = topo::rec_metrics(c);
        j["counts"] = {{"tp_b", c.tp_b}, {"tp_s", c.tp_s}, {"tn_b", c.tn_b},
                       {"fp_b", c.fp_b}, {"fp_s", c.fp_s}, {"fn_b", c.fn_b}};
        j["rec_acc"] = num(m.rec_acc);
        j["rec_sen"] = num(m.rec_sen);
        j["rec_spe"] = num(m.rec_spe);
    } else {
        j["counts"] = nullptr;
    }
    return j.dump();
}

std::string stitches_to_jsonl(const std::vector<Stitch>& stitches) {
    std::string out;
    auto pts = [](const std::vector<VoxelCoord>& v) {
        nlohmann::ordered_json a = nlohmann::ordered_json::array();
        for (const auto& c : v) a.push_back({c.i, c.j, c.k});
        return a;
    };
    for (const auto& s : stitches) {
        nlohmann::ordered_json j;
        j["rtype"] = static_cast<int>(s.rtype);
        j["disconnected"] = s.disconnected;
        j["candidate"] = s.candidate;
        j["path"] = pts(s.path);
        j["centerline"] = pts(s.centerline.points);
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace vr::recon
