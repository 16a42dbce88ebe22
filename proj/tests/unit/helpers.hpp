#pragma once

#include <array>
#include <cmath>
#include <set>
#include <filesystem>
#include <random>
#include <string>

#include "volgrid/volume.hpp"

namespace testing {

inline vr::Volume mask(int nx, int ny, int nz) {
    return vr::Volume({nx, ny, nz}, {1, 1, 1}, vr::VolumeKind::BinaryMask);
}

inline vr::Volume random_mask(std::mt19937_64& rng, int nx, int ny, int nz, double fill) {
    auto m = mask(nx, ny, nz);
    std::bernoulli_distribution b(fill);
    for (auto& v : m.data()) v = b(rng) ? 1.0f : 0.0f;
    return m;
}

// Solid cylinder of `radius` around the x axis line (j = cy, k = cz).
inline void draw_x_tube(vr::Volume& m, int x0, int x1, double cy, double cz, double radius) {
    for (int k = 0; k < m.dims().nz; ++k)
        for (int j = 0; j < m.dims().ny; ++j)
            for (int i = x0; i <= x1; ++i)
                if (std::hypot(j - cy, k - cz) <= radius) m(i, j, k) = 1.0f;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("vr_test_" + name);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testing

namespace testing {

// Euler characteristic of the union of closed unit cubes at the nonzero
// voxels (the topology of a 26-connected foreground).
inline long euler_characteristic(const vr::Volume& m) {
    std::set<std::array<int, 3>> verts;
    std::set<std::array<int, 4>> edges, faces;
    long cubes = 0;
    for (std::size_t idx = 0; idx < m.size(); ++idx) {
        if (m.data()[idx] == 0.0f) continue;
        ++cubes;
        const auto c = m.coord(idx);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int d = 0; d < 2; ++d) verts.insert({c.i + a, c.j + b, c.k + d});
        // Edges/faces keyed by their minimum corner plus axis (edges) or normal axis (faces).
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                edges.insert({c.i, c.j + a, c.k + b, 0});
                edges.insert({c.i + a, c.j, c.k + b, 1});
                edges.insert({c.i + a, c.j + b, c.k, 2});
            }
        for (int a = 0; a < 2; ++a) {
            faces.insert({c.i + a, c.j, c.k, 0});
            faces.insert({c.i, c.j + a, c.k, 1});
            faces.insert({c.i, c.j, c.k + a, 2});
        }
    }
    return long(verts.size()) - long(edges.size()) + long(faces.size()) - cubes;
}

// Torus around the z axis through the volume centre.
inline vr::Volume torus(int n, double major, double minor) {
    auto m = mask(n, n, n);
    const double c = (n - 1) / 2.0;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double q = std::hypot(i - c, j - c) - major;
                if (std::hypot(q, k - c) <= minor) m(i, j, k) = 1.0f;
            }
    return m;
}

}  // namespace testing
