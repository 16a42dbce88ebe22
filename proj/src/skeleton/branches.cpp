#include <algorithm>
#include <nlohmann/json.hpp>

#include "common/error.hpp"
#include "skeleton/skeleton.hpp"

namespace vr::skel {

namespace {

std::vector<VoxelCoord> skeleton_neighbours(const Volume& m, const VoxelCoord& p) {
    std::vector<VoxelCoord> out;
    for (const auto& o : neighbor_offsets(Connectivity::TwentySix)) {
        const auto q = p + o;
        if (m.contains(q) && m.at(q) != 0.0f) out.push_back(q);
    }
    return out;
}

// Orders the voxels of one degree<=2 component into a walk. Starts from the
// smallest-index voxel with fewer than two in-set neighbours, or the smallest
// index when the component is a loop.
std::vector<VoxelCoord> order_path(const Volume& m, const std::vector<std::uint8_t>& in_set,
                                   std::vector<std::uint8_t>& used, const std::vector<VoxelCoord>& comp) {
    auto in_nbrs = [&](const VoxelCoord& p) {
        std::vector<VoxelCoord> out;
        for (const auto& o : neighbor_offsets(Connectivity::TwentySix)) {
            const auto q = p + o;
            if (m.contains(q) && in_set[m.index(q)]) out.push_back(q);
        }
        return out;
    };
    VoxelCoord start = comp.front();
    for (const auto& p : comp)
        if (in_nbrs(p).size() < 2) {
            start = p;
            break;
        }
    std::vector<VoxelCoord> path{start};
    used[m.index(start)] = 1;
    while (true) {
        bool moved = false;
        for (const auto& q : in_nbrs(path.back())) {
            if (!used[m.index(q)]) {
                used[m.index(q)] = 1;
                path.push_back(q);
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    return path;
}

}  // namespace

void update_tangents(CenterlineBranch& b) {
    const auto& p = b.points;
    const std::size_t n = p.size();
    if (n == 0 || n == 1) {
        b.head_tangent = b.tail_tangent = Vec3::Zero();
    } else if (n < 3) {
        b.head_tangent = normalized_or_zero(p[0].vec() - p[n - 1].vec());
        b.tail_tangent = -b.head_tangent;
    } else {
        b.head_tangent = normalized_or_zero(p[0].vec() - p[2].vec());
        b.tail_tangent = normalized_or_zero(p[n - 1].vec() - p[n - 3].vec());
    }
}

std::vector<CenterlineBranch> extract_branches(const Skeleton& skel, const LabeledComponents& components,
                                               int tree_components) {
    const Volume& m = skel.mask;
    const std::size_t n = m.size();
    std::vector<std::uint8_t> junction(n, 0), regular(n, 0), used(n, 0);
    std::vector<std::size_t> voxels;
    for (std::size_t i = 0; i < n; ++i) {
        if (m.data()[i] == 0.0f) continue;
        voxels.push_back(i);
        if (skeleton_neighbours(m, m.coord(i)).size() > 2)
            junction[i] = 1;
        else
            regular[i] = 1;
    }

    std::vector<std::vector<VoxelCoord>> paths;
    std::vector<std::uint8_t> in_set(n, 0);
    for (std::size_t idx : voxels) {
        if (!regular[idx] || used[idx]) continue;
        // Gather the regular component in index order so path ordering is deterministic.
        std::vector<VoxelCoord> comp;
        std::vector<std::size_t> stack{idx};
        std::vector<std::size_t> members;
        auto& mark = used;
        mark[idx] = 2;
        while (!stack.empty()) {
            const auto c = stack.back();
            stack.pop_back();
            members.push_back(c);
            for (const auto& q : skeleton_neighbours(m, m.coord(c))) {
                const auto qi = m.index(q);
                if (regular[qi] && !mark[qi]) {
                    mark[qi] = 2;
                    stack.push_back(qi);
                }
            }
        }
        std::sort(members.begin(), members.end());
        for (auto c : members) {
            comp.push_back(m.coord(c));
            used[c] = 0;
        }
        for (auto c : members) in_set[c] = 1;
        while (true) {
            auto it = std::find_if(comp.begin(), comp.end(), [&](const VoxelCoord& p) { return !used[m.index(p)]; });
            if (it == comp.end()) break;
            std::vector<VoxelCoord> rest(it, comp.end());
            std::erase_if(rest, [&](const VoxelCoord& p) { return used[m.index(p)] != 0; });
            paths.push_back(order_path(m, in_set, used, rest));
            for (const auto& p : paths.back()) in_set[m.index(p)] = 0;
        }
    }

    // Junction voxels join the longest branch whose end touches them; repeated
    // until no more can be placed so chains of junction voxels are absorbed.
    std::vector<std::size_t> pending;
    for (std::size_t idx : voxels)
        if (junction[idx]) pending.push_back(idx);
    bool progress = true;
    while (progress && !pending.empty()) {
        progress = false;
        std::vector<std::size_t> still;
        for (std::size_t idx : pending) {
            const auto p = m.coord(idx);
            int best = -1;
            bool at_head = false;
            for (std::size_t b = 0; b < paths.size(); ++b) {
                const auto& path = paths[b];
                const bool h = chebyshev(path.front(), p) == 1;
                const bool t = chebyshev(path.back(), p) == 1;
                if (!h && !t) continue;
                if (best < 0 || path.size() > paths[best].size()) {
                    best = static_cast<int>(b);
                    at_head = h;
                }
            }
            if (best < 0) {
                still.push_back(idx);
                continue;
            }
            auto& path = paths[best];
            if (at_head)
                path.insert(path.begin(), p);
            else
                path.push_back(p);
            progress = true;
        }
        pending.swap(still);
    }
    // Junction clusters with no reachable branch end become branches of their own.
    if (!pending.empty()) {
        std::fill(used.begin(), used.end(), 0);
        for (auto idx : pending) in_set[idx] = 1;
        for (auto idx : pending) {
            if (used[idx]) continue;
            auto path = order_path(m, in_set, used, {m.coord(idx)});
            for (const auto& q : path) in_set[m.index(q)] = 0;
            paths.push_back(std::move(path));
        }
    }

    std::vector<CenterlineBranch> out;
    out.reserve(paths.size());
    for (auto& path : paths) {
        CenterlineBranch b;
        b.id = static_cast<int>(out.size());
        b.points = std::move(path);
        const auto label = components.labels.empty() ? 0 : components.labels[m.index(b.points.front())];
        b.component_id = label;
        b.is_connected_tree = label >= 1 && label <= tree_components;
        update_tangents(b);
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<VoxelCoord> detect_opening_points(const CenterlineBranch& branch, const Skeleton& skel, int patch) {
    if (patch < 1 || patch % 2 == 0) fail(ErrorCode::EvenKernel, "opening-point patch must be odd");
    if (branch.points.empty()) return {};
    if (branch.points.size() == 1) return {branch.points.front()};
    const Volume& m = skel.mask;
    // A closed loop has no free ends.
    if (branch.points.size() >= 3 && chebyshev(branch.head(), branch.tail()) == 1) return {};
    std::vector<std::uint8_t> own(m.size(), 0);
    for (const auto& p : branch.points) own[m.index(p)] = 1;
    const int r = patch / 2;
    auto is_free = [&](const VoxelCoord& c) {
        for (int k = c.k - r; k <= c.k + r; ++k)
            for (int j = c.j - r; j <= c.j + r; ++j)
                for (int i = c.i - r; i <= c.i + r; ++i) {
                    if (!m.contains(i, j, k)) continue;
                    const auto idx = m.index(i, j, k);
                    if (m.data()[idx] != 0.0f && !own[idx]) return false;
                }
        return true;
    };
    std::vector<VoxelCoord> out;
    if (is_free(branch.head())) out.push_back(branch.head());
    if (is_free(branch.tail())) out.push_back(branch.tail());
    return out;
}

std::string branches_to_jsonl(const std::vector<CenterlineBranch>& branches) {
    std::string out;
    for (const auto& b : branches) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : b.points) pts.push_back({p.i, p.j, p.k});
        nlohmann::json line{{"id", b.id}, {"component", b.component_id}, {"connected", b.is_connected_tree},
                            {"points", std::move(pts)}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

}  // namespace vr::skel
