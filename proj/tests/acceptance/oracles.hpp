#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "volgrid/volume.hpp"

// Scalar-loop reference implementations, written without the library's
// transforms, pooling or metric code.
namespace oracle {

inline double dist_mm(const vr::Volume& v, std::size_t a, std::size_t b) {
    const auto p = v.coord(a), q = v.coord(b);
    const auto& s = v.spacing();
    return std::sqrt(std::pow((p.i - q.i) * s.sx, 2) + std::pow((p.j - q.j) * s.sy, 2) +
                     std::pow((p.k - q.k) * s.sz, 2));
}

// Distance to the nearest voxel whose nonzero-ness equals `target`.
inline std::vector<double> edt(const vr::Volume& m, bool to_foreground, bool use_spacing) {
    vr::Volume unit = m;
    if (!use_spacing) unit = vr::Volume(m.dims(), {1, 1, 1}, m.kind(), m.values());
    std::vector<double> out(m.size(), std::numeric_limits<double>::infinity());
    for (std::size_t a = 0; a < m.size(); ++a)
        for (std::size_t b = 0; b < m.size(); ++b)
            if ((m.data()[b] != 0.0f) == to_foreground) out[a] = std::min(out[a], dist_mm(unit, a, b));
    return out;
}

inline double dice(const vr::Volume& a, const vr::Volume& b) {
    double inter = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a.data()[i] != 0.0f, y = b.data()[i] != 0.0f;
        inter += x && y;
        na += x;
        nb += y;
    }
    return na + nb == 0 ? 1.0 : 2 * inter / (na + nb);
}

inline bool on_surface(const vr::Volume& m, std::size_t idx) {
    if (m.data()[idx] == 0.0f) return false;
    const auto c = m.coord(idx);
    const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (const auto& o : off) {
        const int a = c.i + o[0], b = c.j + o[1], d = c.k + o[2];
        if (!m.contains(a, b, d) || m(a, b, d) == 0.0f) return true;
    }
    return false;
}

inline double hd95(const vr::Volume& a, const vr::Volume& b) {
    std::vector<std::size_t> sa, sb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (on_surface(a, i)) sa.push_back(i);
        if (on_surface(b, i)) sb.push_back(i);
    }
    if (sa.empty() || sb.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> d;
    auto directed = [&](const std::vector<std::size_t>& from, const std::vector<std::size_t>& to) {
        for (auto p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (auto q : to) best = std::min(best, dist_mm(a, p, q));
            d.push_back(best);
        }
    };
    directed(sa, sb);
    directed(sb, sa);
    std::sort(d.begin(), d.end());
    const double h = 0.95 * double(d.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= d.size()) return d.back();
    return d[lo] + (h - double(lo)) * (d[lo + 1] - d[lo]);
}

struct Field {
    vr::Dims d;
    std::vector<double> v;
    double at(int i, int j, int k) const { return v[(std::size_t(k) * d.ny + j) * d.nx + i]; }
    bool inside(int i, int j, int k) const { return i >= 0 && j >= 0 && k >= 0 && i < d.nx && j < d.ny && k < d.nz; }
};

inline Field erode(const Field& f) {
    Field o = f;
    std::size_t n = 0;
    for (int k = 0; k < f.d.nz; ++k)
        for (int j = 0; j < f.d.ny; ++j)
            for (int i = 0; i < f.d.nx; ++i, ++n) {
                double m = f.at(i, j, k);
                const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
                for (const auto& q : off)
                    if (f.inside(i + q[0], j + q[1], k + q[2])) m = std::min(m, f.at(i + q[0], j + q[1], k + q[2]));
                o.v[n] = m;
            }
    return o;
}

inline Field dilate(const Field& f) {
    Field o = f;
    std::size_t n = 0;
    for (int k = 0; k < f.d.nz; ++k)
        for (int j = 0; j < f.d.ny; ++j)
            for (int i = 0; i < f.d.nx; ++i, ++n) {
                double m = f.at(i, j, k);
                for (int c = k - 1; c <= k + 1; ++c)
                    for (int b = j - 1; b <= j + 1; ++b)
                        for (int a = i - 1; a <= i + 1; ++a)
                            if (f.inside(a, b, c)) m = std::max(m, f.at(a, b, c));
                o.v[n] = m;
            }
    return o;
}

inline std::vector<double> soft_skeleton(const std::vector<double>& x, const vr::Dims& d, int iters) {
    Field img{d, x};
    auto residual = [](const Field& f) {
        const Field open = dilate(erode(f));
        std::vector<double> r(f.v.size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::max(f.v[i] - open.v[i], 0.0);
        return r;
    };
    auto skel = residual(img);
    for (int it = 0; it < iters; ++it) {
        img = erode(img);
        const auto delta = residual(img);
        for (std::size_t i = 0; i < skel.size(); ++i) skel[i] += std::max(delta[i] - skel[i] * delta[i], 0.0);
    }
    return skel;
}

// R / (d + 1) on voxels >= 0.5, d = distance to the nearest skeleton voxel.
inline std::vector<double> nsdt(const std::vector<double>& x, const vr::Volume& skeleton, double R) {
    std::vector<double> out(x.size(), 0.0);
    std::vector<std::size_t> sk;
    for (std::size_t i = 0; i < skeleton.size(); ++i)
        if (skeleton.data()[i] >= 0.5f) sk.push_back(i);
    if (sk.empty()) return out;
    const vr::Volume unit(skeleton.dims(), {1, 1, 1}, skeleton.kind(), skeleton.values());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < 0.5) continue;
        double best = std::numeric_limits<double>::infinity();
        for (auto s : sk) best = std::min(best, dist_mm(unit, i, s));
        out[i] = R / (best + 1.0);
    }
    return out;
}

inline double weighted_ratio(const std::vector<double>& s, const std::vector<double>& ns, const std::vector<double>& v,
                             const std::vector<double>& nother) {
    double num = 0, den = 0;
    bool empty = true;
    for (std::size_t i = 0; i < s.size(); ++i) {
        num += s[i] * ns[i] * v[i] * nother[i];
        den += (s[i] * ns[i]) * (s[i] * ns[i]);
        empty = empty && s[i] == 0.0;
    }
    if (den == 0.0) return empty ? 1.0 : 0.0;
    return num / den;
}

struct ClDice {
    double tprec, tsens, loss;
};

// Hard skeletons are supplied by the caller (thinning has no closed form).
inline ClDice soft_cldice(const std::vector<double>& vl, const std::vector<double>& vp, const vr::Dims& d,
                          const vr::Volume& hard_skel_l, const vr::Volume& hard_skel_p, double R, int iters) {
    const auto sp = soft_skeleton(vp, d, iters), sl = soft_skeleton(vl, d, iters);
    const auto np = nsdt(vp, hard_skel_p, R), nl = nsdt(vl, hard_skel_l, R);
    ClDice r;
    r.tprec = weighted_ratio(sp, np, vp, nl);
    r.tsens = weighted_ratio(sl, nl, vp, np);
    const double tp = std::clamp(r.tprec, 0.0, 1.0), ts = std::clamp(r.tsens, 0.0, 1.0);
    r.loss = tp + ts == 0.0 ? 1.0 : 1.0 - 2 * tp * ts / (tp + ts);
    return r;
}

}  // namespace oracle
