#include "skeleton/soft_skeleton.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace vr::skel {

namespace {

struct Grid {
    int nx, ny, nz;
    std::size_t idx(int i, int j, int k) const { return (std::size_t(k) * ny + j) * nx + i; }
};

void erode(const Grid& g, const std::vector<double>& in, std::vector<double>& out, std::vector<std::uint32_t>& src) {
    out.resize(in.size());
    src.resize(in.size());
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const std::size_t c = g.idx(i, j, k);
                std::size_t best = c;
                auto consider = [&](int a, int b, int d) {
                    if (a < 0 || b < 0 || d < 0 || a >= g.nx || b >= g.ny || d >= g.nz) return;
                    const std::size_t n = g.idx(a, b, d);
                    if (in[n] < in[best]) best = n;
                };
                consider(i - 1, j, k);
                consider(i + 1, j, k);
                consider(i, j - 1, k);
                consider(i, j + 1, k);
                consider(i, j, k - 1);
                consider(i, j, k + 1);
                out[c] = in[best];
                src[c] = static_cast<std::uint32_t>(best);
            }
}

void dilate(const Grid& g, const std::vector<double>& in, std::vector<double>& out, std::vector<std::uint32_t>& src) {
    out.resize(in.size());
    src.resize(in.size());
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const std::size_t c = g.idx(i, j, k);
                std::size_t best = c;
                for (int dk = -1; dk <= 1; ++dk)
                    for (int dj = -1; dj <= 1; ++dj)
                        for (int di = -1; di <= 1; ++di) {
                            const int a = i + di, b = j + dj, d = k + dk;
                            if (a < 0 || b < 0 || d < 0 || a >= g.nx || b >= g.ny || d >= g.nz) continue;
                            const std::size_t n = g.idx(a, b, d);
                            if (in[n] > in[best]) best = n;
                        }
                out[c] = in[best];
                src[c] = static_cast<std::uint32_t>(best);
            }
}

// g_in[src[v]] += g_out[v]
void route(const std::vector<std::uint32_t>& src, const std::vector<double>& g_out, std::vector<double>& g_in) {
    for (std::size_t v = 0; v < src.size(); ++v) g_in[src[v]] += g_out[v];
}

}  // namespace

std::vector<double> soft_skeleton(std::span<const double> x, const Dims& dims, int iterations, SoftSkeletonTape* tape) {
    if (iterations < 1) fail(ErrorCode::InvalidArgument, "soft skeleton needs at least one iteration");
    if (x.size() != dims.count()) fail(ErrorCode::DimMismatch, "soft skeleton input size mismatch");
    const Grid g{dims.nx, dims.ny, dims.nz};
    const std::size_t n = x.size();
    std::vector<double> img(x.begin(), x.end());
    std::vector<double> eroded, opened, tmp;
    std::vector<std::uint32_t> s_img, s_er, s_op;

    erode(g, img, eroded, s_er);
    dilate(g, eroded, opened, s_op);
    std::vector<double> skel(n);
    std::vector<double> pre0(n);
    for (std::size_t v = 0; v < n; ++v) {
        pre0[v] = img[v] - opened[v];
        skel[v] = std::max(pre0[v], 0.0);
    }
    if (tape) {
        tape->dims = dims;
        tape->iterations = iterations;
        tape->pre0 = pre0;
        tape->erode0_src = s_er;
        tape->open0_src = s_op;
        tape->steps.clear();
    }
    for (int it = 0; it < iterations; ++it) {
        erode(g, img, tmp, s_img);
        img.swap(tmp);
        erode(g, img, eroded, s_er);
        dilate(g, eroded, opened, s_op);
        SoftSkeletonTape::Step step;
        if (tape) {
            step.skel_prev = skel;
            step.dpre.resize(n);
            step.delta.resize(n);
            step.ipre.resize(n);
        }
        for (std::size_t v = 0; v < n; ++v) {
            const double dpre = img[v] - opened[v];
            const double delta = std::max(dpre, 0.0);
            const double ipre = delta - skel[v] * delta;
            if (tape) {
                step.dpre[v] = dpre;
                step.delta[v] = delta;
                step.ipre[v] = ipre;
            }
            skel[v] += std::max(ipre, 0.0);
        }
        if (tape) {
            step.img_src = s_img;
            step.erode_src = s_er;
            step.open_src = s_op;
            tape->steps.push_back(std::move(step));
        }
    }
    return skel;
}

std::vector<double> soft_skeleton_backward(const SoftSkeletonTape& tape, std::span<const double> grad_skel) {
    const std::size_t n = tape.dims.count();
    if (grad_skel.size() != n) fail(ErrorCode::DimMismatch, "soft skeleton gradient size mismatch");
    std::vector<double> g_skel(grad_skel.begin(), grad_skel.end());
    // g_img holds the gradient w.r.t. img_j while walking the steps backwards.
    std::vector<double> g_img(n, 0.0);
    std::vector<double> g_e(n), g_prev(n);
    for (int j = static_cast<int>(tape.steps.size()) - 1; j >= 0; --j) {
        const auto& s = tape.steps[j];
        std::vector<double> g_dpre(n), g_open(n);
        for (std::size_t v = 0; v < n; ++v) {
            const double g_ipre = s.ipre[v] > 0.0 ? g_skel[v] : 0.0;
            const double g_delta = g_ipre * (1.0 - s.skel_prev[v]);
            g_skel[v] += g_ipre * (-s.delta[v]);
            g_dpre[v] = s.dpre[v] > 0.0 ? g_delta : 0.0;
            g_img[v] += g_dpre[v];
            g_open[v] = -g_dpre[v];
        }
        std::fill(g_e.begin(), g_e.end(), 0.0);
        route(s.open_src, g_open, g_e);
        route(s.erode_src, g_e, g_img);
        // img_j = erode(img_{j-1})
        std::fill(g_prev.begin(), g_prev.end(), 0.0);
        route(s.img_src, g_img, g_prev);
        g_img.swap(g_prev);
    }
    // skel_0 = relu(img0 - open(img0))
    std::vector<double> g_open(n);
    for (std::size_t v = 0; v < n; ++v) {
        const double g_pre = tape.pre0[v] > 0.0 ? g_skel[v] : 0.0;
        g_img[v] += g_pre;
        g_open[v] = -g_pre;
    }
    std::fill(g_e.begin(), g_e.end(), 0.0);
    route(tape.open0_src, g_open, g_e);
    route(tape.erode0_src, g_e, g_img);
    return g_img;
}

}  // namespace vr::skel
