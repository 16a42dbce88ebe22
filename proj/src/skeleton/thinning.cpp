#include <algorithm>
#include <array>
#include <vector>

#include "common/error.hpp"
#include "skeleton/skeleton.hpp"
#include "skeleton/soft_skeleton.hpp"

namespace vr::skel {

namespace {

// Cells of the 3x3x3 cube are indexed (dz+1)*9 + (dy+1)*3 + (dx+1); 13 is
// the centre.
constexpr int kCenter = 13;

struct CubeTables {
    std::array<std::vector<int>, 27> adj26;  // 26-adjacency inside the cube
    std::array<std::vector<int>, 27> adj6;   // 6-adjacency restricted to N18
    std::array<bool, 27> in_n18{};
    std::array<bool, 27> face{};
};

const CubeTables& tables() {
    static const CubeTables t = [] {
        CubeTables t;
        auto dx = [](int c) { return c % 3 - 1; };
        auto dy = [](int c) { return (c / 3) % 3 - 1; };
        auto dz = [](int c) { return c / 9 - 1; };
        for (int c = 0; c < 27; ++c) {
            const int m = std::abs(dx(c)) + std::abs(dy(c)) + std::abs(dz(c));
            t.in_n18[c] = c != kCenter && m <= 2;
            t.face[c] = m == 1;
        }
        for (int a = 0; a < 27; ++a) {
            if (a == kCenter) continue;
            for (int b = 0; b < 27; ++b) {
                if (b == a || b == kCenter) continue;
                const int ex = std::abs(dx(a) - dx(b)), ey = std::abs(dy(a) - dy(b)), ez = std::abs(dz(a) - dz(b));
                if (std::max({ex, ey, ez}) == 1) t.adj26[a].push_back(b);
                if (ex + ey + ez == 1 && t.in_n18[a] && t.in_n18[b]) t.adj6[a].push_back(b);
            }
        }
        return t;
    }();
    return t;
}

// Simple point test for (26, 6) digital topology: the foreground of N26*
// is one 26-component and exactly one 6-component of the N18 background
// touches a face of the centre.
bool is_simple(const std::array<std::uint8_t, 27>& cube) {
    const auto& t = tables();
    std::array<int, 27> stack{};
    std::array<bool, 27> seen{};
    int fg_components = 0;
    for (int s = 0; s < 27; ++s) {
        if (s == kCenter || !cube[s] || seen[s]) continue;
        if (++fg_components > 1) return false;
        int top = 0;
        stack[top++] = s;
        seen[s] = true;
        while (top) {
            const int c = stack[--top];
            for (int n : t.adj26[c])
                if (cube[n] && !seen[n]) {
                    seen[n] = true;
                    stack[top++] = n;
                }
        }
    }
    if (fg_components != 1) return false;
    seen.fill(false);
    int bg_components = 0;
    for (int s = 0; s < 27; ++s) {
        if (!t.face[s] || cube[s] || seen[s]) continue;
        if (++bg_components > 1) return false;
        int top = 0;
        stack[top++] = s;
        seen[s] = true;
        while (top) {
            const int c = stack[--top];
            for (int n : t.adj6[c])
                if (!cube[n] && !seen[n]) {
                    seen[n] = true;
                    stack[top++] = n;
                }
        }
    }
    return bg_components == 1;
}

struct Grid {
    Dims d;
    std::vector<std::uint8_t> v;
    bool get(int i, int j, int k) const {
        if (i < 0 || j < 0 || k < 0 || i >= d.nx || j >= d.ny || k >= d.nz) return false;
        return v[(std::size_t(k) * d.ny + j) * d.nx + i] != 0;
    }
    std::array<std::uint8_t, 27> cube(const VoxelCoord& c) const {
        std::array<std::uint8_t, 27> out{};
        for (int z = -1; z <= 1; ++z)
            for (int y = -1; y <= 1; ++y)
                for (int x = -1; x <= 1; ++x) out[(z + 1) * 9 + (y + 1) * 3 + (x + 1)] = get(c.i + x, c.j + y, c.k + z);
        return out;
    }
};

int neighbour_count(const std::array<std::uint8_t, 27>& cube) {
    int n = 0;
    for (int c = 0; c < 27; ++c)
        if (c != kCenter && cube[c]) ++n;
    return n;
}

bool removable(const Grid& g, const VoxelCoord& p) {
    const auto cube = g.cube(p);
    if (neighbour_count(cube) <= 1) return false;  // curve end or isolated voxel
    return is_simple(cube);
}

int degree(const Grid& g, const VoxelCoord& p) { return neighbour_count(g.cube(p)); }

// Removes end-to-junction chains of at most max_len voxels. Such spurs come
// from surface bumps that became curve ends during thinning.
void prune_spurs(Grid& g, const std::vector<VoxelCoord>& fg, int max_len) {
    if (max_len <= 0) return;
    auto idx = [&](const VoxelCoord& c) { return (std::size_t(c.k) * g.d.ny + c.j) * g.d.nx + c.i; };
    std::vector<VoxelCoord> doomed;
    for (const auto& e : fg) {
        if (!g.v[idx(e)] || degree(g, e) != 1) continue;
        std::vector<VoxelCoord> chain{e};
        VoxelCoord prev = e, cur = e;
        bool at_junction = false;
        while (static_cast<int>(chain.size()) <= max_len) {
            VoxelCoord next = cur;
            for (int z = -1; z <= 1; ++z)
                for (int y = -1; y <= 1; ++y)
                    for (int x = -1; x <= 1; ++x) {
                        const VoxelCoord q{cur.i + x, cur.j + y, cur.k + z};
                        if (q == cur || q == prev || !g.get(q.i, q.j, q.k)) continue;
                        next = q;
                    }
            if (next == cur) break;  // isolated segment, keep it
            if (degree(g, next) > 2) {
                at_junction = true;
                break;
            }
            prev = cur;
            cur = next;
            chain.push_back(cur);
        }
        if (at_junction && static_cast<int>(chain.size()) <= max_len)
            doomed.insert(doomed.end(), chain.begin(), chain.end());
    }
    for (const auto& p : doomed) g.v[idx(p)] = 0;
}

}  // namespace

Skeleton soft_skeletonize(const Volume& prob, int iterations) {
    std::vector<double> x(prob.data().begin(), prob.data().end());
    const auto s = soft_skeleton(x, prob.dims(), iterations);
    Volume out = Volume::like(prob, VolumeKind::Probability);
    auto data = out.data();
    for (std::size_t i = 0; i < s.size(); ++i) data[i] = static_cast<float>(std::clamp(s[i], 0.0, 1.0));
    return {std::move(out), "soft", true};
}

Skeleton skeletonize_hard(const Volume& mask, const std::string& source, int spur_length) {
    Grid g{mask.dims(), std::vector<std::uint8_t>(mask.size())};
    std::vector<VoxelCoord> fg;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        g.v[i] = mask.data()[i] != 0.0f;
        if (g.v[i]) fg.push_back(mask.coord(i));
    }
    static constexpr std::array<VoxelCoord, 6> directions{
        {{0, 1, 0}, {0, -1, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 0, 1}, {0, 0, -1}}};
    bool changed = true;
    std::vector<VoxelCoord> candidates;
    while (changed) {
        changed = false;
        for (const auto& dir : directions) {
            candidates.clear();
            for (const auto& p : fg) {
                if (!g.v[mask.index(p)]) continue;
                if (g.get(p.i + dir.i, p.j + dir.j, p.k + dir.k)) continue;  // not a border voxel in this direction
                if (removable(g, p)) candidates.push_back(p);
            }
            // Sequential re-check keeps every single deletion topology-safe.
            for (const auto& p : candidates) {
                if (removable(g, p)) {
                    g.v[mask.index(p)] = 0;
                    changed = true;
                }
            }
        }
        std::erase_if(fg, [&](const VoxelCoord& p) { return !g.v[mask.index(p)]; });
    }
    prune_spurs(g, fg, spur_length);
    std::erase_if(fg, [&](const VoxelCoord& p) { return !g.v[mask.index(p)]; });
    Volume out = Volume::like(mask, VolumeKind::BinaryMask);
    for (const auto& p : fg) out.at(p) = 1.0f;
    return {std::move(out), source, false};
}

}  // namespace vr::skel
