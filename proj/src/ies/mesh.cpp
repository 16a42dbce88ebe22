#include <algorithm>
#include <cstring>
#include <fstream>

#include "common/error.hpp"
#include "ies/ies.hpp"
#include "ies/mc_tables.hpp"

namespace vr::ies {

std::vector<Triangle> marching_cubes(const std::vector<double>& field, const Dims& dims, const Spacing& spacing,
                                     double iso) {
    if (field.size() != dims.count()) fail(ErrorCode::SizeMismatch, "marching cubes field size mismatch");
    std::vector<Triangle> out;
    auto at = [&](int i, int j, int k) { return field[(static_cast<std::size_t>(k) * dims.ny + j) * dims.nx + i]; };
    for (int k = 0; k + 1 < dims.nz; ++k)
        for (int j = 0; j + 1 < dims.ny; ++j)
            for (int i = 0; i + 1 < dims.nx; ++i) {
                double value[8];
                Vec3 pos[8];
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    const int ci = i + mc::kCorner[c][0], cj = j + mc::kCorner[c][1], ck = k + mc::kCorner[c][2];
                    value[c] = at(ci, cj, ck);
                    pos[c] = Vec3(ci * spacing.sx, cj * spacing.sy, ck * spacing.sz);
                    if (value[c] < iso) cube |= 1 << c;
                }
                const int edges = mc::kEdgeTable[cube];
                if (edges == 0) continue;
                Vec3 cut[12];
                for (int e = 0; e < 12; ++e) {
                    if (!(edges & (1 << e))) continue;
                    const int a = mc::kEdge[e][0], b = mc::kEdge[e][1];
                    const double den = value[b] - value[a];
                    const double mu = den != 0.0 ? std::clamp((iso - value[a]) / den, 0.0, 1.0) : 0.5;
                    cut[e] = pos[a] + mu * (pos[b] - pos[a]);
                }
                for (int n = 0; mc::kTriTable[cube][n] != -1; n += 3)
                    out.push_back({cut[mc::kTriTable[cube][n]], cut[mc::kTriTable[cube][n + 1]],
                                   cut[mc::kTriTable[cube][n + 2]]});
            }
    return out;
}

void write_stl(const std::filesystem::path& path, const std::vector<Triangle>& triangles) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot open " + path.string());
    char header[80] = {};
    std::strncpy(header, "vesselrepair surface", sizeof(header) - 1);
    out.write(header, sizeof(header));
    const auto count = static_cast<std::uint32_t>(triangles.size());
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    auto put = [&](const Vec3& v) {
        const float f[3] = {float(v.x()), float(v.y()), float(v.z())};
        out.write(reinterpret_cast<const char*>(f), sizeof(f));
    };
    const std::uint16_t attr = 0;
    for (const auto& t : triangles) {
        put(normalized_or_zero((t[1] - t[0]).cross(t[2] - t[0])));
        for (const auto& v : t) put(v);
        out.write(reinterpret_cast<const char*>(&attr), sizeof(attr));
    }
    if (!out) fail(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace vr::ies
