#include "volgrid/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "common/error.hpp"
#include "common/parallel.hpp"

namespace vr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) along one line.
// f and out are strided views of length n; w2 is the squared axis weight.
void edt_1d(double* data, std::size_t stride, int n, double w2, std::vector<double>& f, std::vector<int>& v,
            std::vector<double>& z) {
    f.resize(n);
    v.resize(n);
    z.resize(n + 1);
    for (int q = 0; q < n; ++q) f[q] = data[q * stride];
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        while (true) {
            if (k < 0) {
                k = 0;
                v[0] = q;
                z[0] = -kInf;
                z[1] = kInf;
                break;
            }
            const int p = v[k];
            const double s = ((f[q] + w2 * q * q) - (f[p] + w2 * p * p)) / (2.0 * w2 * (q - p));
            if (s <= z[k]) {
                --k;
                continue;
            }
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = kInf;
            break;
        }
    }
    if (k < 0) return;  // whole line is +inf
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double d = q - v[j];
        data[q * stride] = w2 * d * d + f[v[j]];
    }
}

Volume finish_dt(const Volume& mask, std::vector<double> sq) {
    Volume out = Volume::like(mask, VolumeKind::Distance);
    auto data = out.data();
    for (std::size_t i = 0; i < sq.size(); ++i) data[i] = static_cast<float>(std::sqrt(sq[i]));
    return out;
}

template <typename Cmp>
Volume pool(const Volume& vol, int kernel, Cmp better) {
    if (kernel < 1 || kernel % 2 == 0) fail(ErrorCode::EvenKernel, "pool kernel must be odd and >= 1");
    if (kernel == 1) return vol;
    const int r = kernel / 2;
    const auto& d = vol.dims();
    Volume a = vol;
    Volume b = vol;
    // Separable: a box extremum is the composition of 1D extrema.
    const int sizes[3] = {d.nx, d.ny, d.nz};
    const std::size_t strides[3] = {1, static_cast<std::size_t>(d.nx), static_cast<std::size_t>(d.nx) * d.ny};
    for (int axis = 0; axis < 3; ++axis) {
        const int n = sizes[axis];
        const std::size_t stride = strides[axis];
        const std::size_t lines = d.count() / n;
        auto src = a.data();
        auto dst = b.data();
        parallel_for(lines, [&](std::size_t lb, std::size_t le) {
            for (std::size_t line = lb; line < le; ++line) {
                // decompose line index into the base offset of that line
                std::size_t base;
                if (axis == 0)
                    base = line * d.nx;
                else if (axis == 1)
                    base = (line / d.nx) * d.nx * d.ny + (line % d.nx);
                else
                    base = line;
                for (int q = 0; q < n; ++q) {
                    float best = src[base + q * stride];
                    const int lo = std::max(0, q - r), hi = std::min(n - 1, q + r);
                    for (int t = lo; t <= hi; ++t) {
                        const float x = src[base + t * stride];
                        if (better(x, best)) best = x;
                    }
                    dst[base + q * stride] = best;
                }
            }
        });
        std::swap(a, b);
    }
    return a.with_kind(vol.kind());
}

}  // namespace

std::vector<double> squared_dt(const Volume& mask, bool to_foreground, const Spacing& w) {
    const auto& d = mask.dims();
    const auto src = mask.data();
    std::vector<double> sq(src.size());
    bool any_target = false;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const bool target = to_foreground ? src[i] != 0.0f : src[i] == 0.0f;
        sq[i] = target ? 0.0 : kInf;
        any_target |= target;
    }
    if (!any_target)
        fail(ErrorCode::EmptyMask, to_foreground ? "distance transform: mask has no foreground"
                                                 : "distance transform: mask has no background");
    const std::size_t nx = d.nx, ny = d.ny, nz = d.nz;
    // x lines
    parallel_for(ny * nz, [&](std::size_t b, std::size_t e) {
        std::vector<double> f, z;
        std::vector<int> v;
        for (std::size_t l = b; l < e; ++l) edt_1d(sq.data() + l * nx, 1, d.nx, w.sx * w.sx, f, v, z);
    });
    // y lines
    parallel_for(nx * nz, [&](std::size_t b, std::size_t e) {
        std::vector<double> f, z;
        std::vector<int> v;
        for (std::size_t l = b; l < e; ++l) {
            const std::size_t x = l % nx, zz = l / nx;
            edt_1d(sq.data() + zz * nx * ny + x, nx, d.ny, w.sy * w.sy, f, v, z);
        }
    });
    // z lines
    parallel_for(nx * ny, [&](std::size_t b, std::size_t e) {
        std::vector<double> f, z;
        std::vector<int> v;
        for (std::size_t l = b; l < e; ++l) edt_1d(sq.data() + l, nx * ny, d.nz, w.sz * w.sz, f, v, z);
    });
    return sq;
}

Volume euclidean_dt(const Volume& mask, bool to_foreground) {
    return finish_dt(mask, squared_dt(mask, to_foreground, Spacing{1.0, 1.0, 1.0}));
}

Volume euclidean_dt_mm(const Volume& mask, bool to_foreground) {
    return finish_dt(mask, squared_dt(mask, to_foreground, mask.spacing()));
}

LabeledComponents connected_components(const Volume& mask, Connectivity connectivity) {
    LabeledComponents out;
    out.dims = mask.dims();
    const auto src = mask.data();
    out.labels.assign(src.size(), 0);
    const auto offsets = neighbor_offsets(connectivity);
    std::vector<std::size_t> raw_sizes;
    std::vector<std::size_t> stack;
    std::int32_t next = 0;
    // Scanning in linear order means provisional labels are ordered by each
    // component's smallest voxel index.
    for (std::size_t seed = 0; seed < src.size(); ++seed) {
        if (src[seed] == 0.0f || out.labels[seed] != 0) continue;
        ++next;
        std::size_t size = 0;
        out.labels[seed] = next;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            ++size;
            const VoxelCoord c = mask.coord(cur);
            for (const auto& o : offsets) {
                const VoxelCoord n = c + o;
                if (!mask.contains(n)) continue;
                const std::size_t ni = mask.index(n);
                if (src[ni] == 0.0f || out.labels[ni] != 0) continue;
                out.labels[ni] = next;
                stack.push_back(ni);
            }
        }
        raw_sizes.push_back(size);
    }
    std::vector<int> order(raw_sizes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return raw_sizes[a] > raw_sizes[b]; });
    std::vector<std::int32_t> remap(raw_sizes.size() + 1, 0);
    out.sizes.resize(raw_sizes.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        remap[order[r] + 1] = static_cast<std::int32_t>(r + 1);
        out.sizes[r] = raw_sizes[order[r]];
    }
    for (auto& l : out.labels) l = remap[l];
    return out;
}

Volume max_pool3(const Volume& vol, int kernel) {
    return pool(vol, kernel, [](float x, float best) { return x > best; });
}

Volume min_pool3(const Volume& vol, int kernel) {
    return pool(vol, kernel, [](float x, float best) { return x < best; });
}

Volume dilate(const Volume& mask, int radius) {
    if (radius <= 0) return mask;
    return max_pool3(mask, 2 * radius + 1);
}

}  // namespace vr
