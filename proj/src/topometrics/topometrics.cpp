#include "topometrics/topometrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "common/error.hpp"
#include "skeleton/soft_skeleton.hpp"
#include "volgrid/ops.hpp"

namespace vr::topo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Volume support(const Volume& v) {
    Volume out = Volume::like(v, VolumeKind::BinaryMask);
    auto d = out.data();
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = v.data()[i] >= 0.5f ? 1.0f : 0.0f;
    return out;
}

Volume support(std::span<const double> x, const Dims& dims) {
    Volume out(dims, {1, 1, 1}, VolumeKind::BinaryMask);
    auto d = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] >= 0.5 ? 1.0f : 0.0f;
    return out;
}

std::vector<double> as_doubles(const Volume& v) { return {v.data().begin(), v.data().end()}; }

void check_sizes(std::initializer_list<std::size_t> sizes) {
    const auto first = *sizes.begin();
    for (auto s : sizes)
        if (s != first) fail(ErrorCode::DimMismatch, "metric inputs differ in size");
}

// Hard-skeleton NSDT of the thresholded field.
std::vector<double> metric_nsdt(std::span<const double> x, const Dims& dims, double R) {
    const Volume mask = support(x, dims);
    const auto sk = skel::skeletonize_hard(mask);
    return nsdt_weights(mask, sk.mask, R);
}

double ratio(double num, double den, bool skeleton_empty) {
    if (den == 0.0) return skeleton_empty ? 1.0 : 0.0;
    return num / den;
}

bool all_zero(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
}

}  // namespace

std::vector<double> nsdt_weights(const Volume& vol, const Volume& skeleton, double R) {
    require_same_dims(vol, skeleton, "nsdt");
    if (!(R > 0.0)) fail(ErrorCode::InvalidArgument, "NSDT amplification R must be positive");
    std::vector<double> out(vol.size(), 0.0);
    const Volume sk = support(skeleton);
    if (sk.count_nonzero() == 0) return out;
    const auto d2 = squared_dt(sk, true, Spacing{1, 1, 1});
    for (std::size_t i = 0; i < out.size(); ++i)
        if (vol.data()[i] >= 0.5f) out[i] = R / (std::sqrt(d2[i]) + 1.0);
    return out;
}

Volume nsdt(const Volume& vol, const skel::Skeleton& skel, const NsdtParams& params) {
    if (support(skel.mask).count_nonzero() == 0) fail(ErrorCode::EmptySkeleton, "NSDT needs a nonempty skeleton");
    const auto w = nsdt_weights(vol, skel.mask, params.R);
    Volume out = Volume::like(vol, VolumeKind::Distance);
    for (std::size_t i = 0; i < w.size(); ++i) out.data()[i] = static_cast<float>(w[i]);
    return out;
}

double tprec(std::span<const double> sp, std::span<const double> vp, std::span<const double> nsdt_p,
             std::span<const double> nsdt_l) {
    check_sizes({sp.size(), vp.size(), nsdt_p.size(), nsdt_l.size()});
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < sp.size(); ++i) {
        const double w = sp[i] * nsdt_p[i];
        num += w * vp[i] * nsdt_l[i];
        den += w * w;
    }
    return ratio(num, den, all_zero(sp));
}

double tsens(std::span<const double> sl, std::span<const double> vp, std::span<const double> nsdt_l,
             std::span<const double> nsdt_p) {
    check_sizes({sl.size(), vp.size(), nsdt_l.size(), nsdt_p.size()});
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < sl.size(); ++i) {
        const double w = sl[i] * nsdt_l[i];
        num += w * nsdt_p[i] * vp[i];
        den += w * w;
    }
    return ratio(num, den, all_zero(sl));
}

double tprec(const Volume& sp, const Volume& vl, const Volume& vp, const Volume& nsdt_p, const Volume& nsdt_l) {
    for (const Volume* v : {&vl, &vp, &nsdt_p, &nsdt_l}) require_same_dims(sp, *v, "tprec");
    return tprec(as_doubles(sp), as_doubles(vp), as_doubles(nsdt_p), as_doubles(nsdt_l));
}

double tsens(const Volume& sl, const Volume& vl, const Volume& vp, const Volume& nsdt_l, const Volume& nsdt_p) {
    for (const Volume* v : {&vl, &vp, &nsdt_l, &nsdt_p}) require_same_dims(sl, *v, "tsens");
    return tsens(as_doubles(sl), as_doubles(vp), as_doubles(nsdt_l), as_doubles(nsdt_p));
}

double dscl_from(double tp, double ts) {
    if (tp + ts == 0.0) return 1.0;
    return 1.0 - 2.0 * tp * ts / (tp + ts);
}

SoftClDiceResult soft_cldice(std::span<const double> vl, std::span<const double> vp, const Dims& dims,
                             const SoftClDiceParams& params, bool with_grad) {
    check_sizes({vl.size(), vp.size(), dims.count()});
    if (params.soft_iters < 1) fail(ErrorCode::InvalidArgument, "soft_iters must be >= 1");
    skel::SoftSkeletonTape tape;
    const auto sp = skel::soft_skeleton(vp, dims, params.soft_iters, with_grad ? &tape : nullptr);
    const auto sl = skel::soft_skeleton(vl, dims, params.soft_iters);
    const auto np = metric_nsdt(vp, dims, params.R);
    const auto nl = metric_nsdt(vl, dims, params.R);

    SoftClDiceResult r;
    r.tprec = tprec(sp, vp, np, nl);
    r.tsens = tsens(sl, vp, nl, np);
    // Soft skeleton values below 1 enter the denominators squared, so the raw
    // ratios can exceed 1; the loss uses them clipped to [0, 1].
    const double tp = std::clamp(r.tprec, 0.0, 1.0), ts = std::clamp(r.tsens, 0.0, 1.0);
    r.loss = dscl_from(tp, ts);
    if (!with_grad) return r;

    const std::size_t n = vp.size();
    r.grad.assign(n, 0.0);
    const double sum = tp + ts;
    if (sum == 0.0) return r;
    const double dl_dtp = r.tprec < 1.0 ? -2.0 * ts * ts / (sum * sum) : 0.0;
    const double dl_dts = r.tsens < 1.0 ? -2.0 * tp * tp / (sum * sum) : 0.0;

    double a = 0.0, b = 0.0, d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = sp[i] * np[i];
        a += w * vp[i] * nl[i];
        b += w * w;
        const double u = sl[i] * nl[i];
        d += u * u;
    }
    std::vector<double> g_skel(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (b > 0.0) {
            g_skel[i] = dl_dtp * (np[i] * vp[i] * nl[i] / b - a * 2.0 * sp[i] * np[i] * np[i] / (b * b));
            r.grad[i] += dl_dtp * sp[i] * np[i] * nl[i] / b;
        }
        if (d > 0.0) r.grad[i] += dl_dts * sl[i] * nl[i] * np[i] / d;
    }
    const auto back = skel::soft_skeleton_backward(tape, g_skel);
    for (std::size_t i = 0; i < n; ++i) r.grad[i] += back[i];
    return r;
}

double nsdt_soft_cldice(const Volume& vl, const Volume& vp, double R, int soft_iters) {
    require_same_dims(vl, vp, "nsdt_soft_cldice");
    return soft_cldice(as_doubles(vl), as_doubles(vp), vl.dims(), {R, soft_iters}).loss;
}

double dice_loss(std::span<const double> vl, std::span<const double> vp) {
    check_sizes({vl.size(), vp.size()});
    double inter = 0.0, total = 0.0;
    for (std::size_t i = 0; i < vl.size(); ++i) {
        inter += vp[i] * vl[i];
        total += vp[i] + vl[i];
    }
    return total == 0.0 ? 0.0 : 1.0 - 2.0 * inter / total;
}

JointLossResult joint_loss(std::span<const double> vl, std::span<const double> vp, const Dims& dims, double alpha,
                           const SoftClDiceParams& params, bool with_grad) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
    auto s = soft_cldice(vl, vp, dims, params, with_grad);
    JointLossResult r;
    r.dice_loss = dice_loss(vl, vp);
    r.dscl = s.loss;
    r.loss = (1.0 - alpha) * r.dice_loss + alpha * r.dscl;
    if (!with_grad) return r;
    double inter = 0.0, total = 0.0;
    for (std::size_t i = 0; i < vl.size(); ++i) {
        inter += vp[i] * vl[i];
        total += vp[i] + vl[i];
    }
    r.grad.assign(vp.size(), 0.0);
    for (std::size_t i = 0; i < vp.size(); ++i) {
        double g_dice = 0.0;
        if (total > 0.0) g_dice = -2.0 * (vl[i] * total - inter) / (total * total);
        r.grad[i] = (1.0 - alpha) * g_dice + alpha * s.grad[i];
    }
    return r;
}

double joint_loss(const Volume& vl, const Volume& vp, double alpha, double R, int soft_iters) {
    require_same_dims(vl, vp, "joint_loss");
    return joint_loss(as_doubles(vl), as_doubles(vp), vl.dims(), alpha, {R, soft_iters}).loss;
}

double dice(const Volume& a, const Volume& b) {
    require_same_dims(a, b, "dice");
    std::size_t inter = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a.data()[i] != 0.0f, y = b.data()[i] != 0.0f;
        na += x;
        nb += y;
        inter += x && y;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * double(inter) / double(na + nb);
}

namespace {

Volume surface(const Volume& m) {
    Volume out = Volume::like(m, VolumeKind::BinaryMask);
    const auto& d = m.dims();
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                if (m(i, j, k) == 0.0f) continue;
                for (const auto& o : neighbor_offsets(Connectivity::Six)) {
                    const int a = i + o.i, b = j + o.j, c = k + o.k;
                    if (!m.contains(a, b, c) || m(a, b, c) == 0.0f) {
                        out(i, j, k) = 1.0f;
                        break;
                    }
                }
            }
    return out;
}

void directed_surface_distances(const Volume& from, const Volume& to, std::vector<double>& out) {
    const auto dist = euclidean_dt_mm(to, true);
    for (std::size_t i = 0; i < from.size(); ++i)
        if (from.data()[i] != 0.0f) out.push_back(dist.data()[i]);
}

}  // namespace

double hd95(const Volume& a, const Volume& b) {
    require_same_dims(a, b, "hd95");
    if (a.count_nonzero() == 0 || b.count_nonzero() == 0) return kNaN;
    Volume sa = surface(a), sb = surface(b);
    std::vector<double> d;
    directed_surface_distances(sa, sb, d);
    directed_surface_distances(sb, sa, d);
    std::sort(d.begin(), d.end());
    const double h = 0.95 * double(d.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= d.size()) return d.back();
    return d[lo] + (h - double(lo)) * (d[lo + 1] - d[lo]);
}

double overlap_ov(const std::vector<skel::CenterlineBranch>& ref, const std::vector<skel::CenterlineBranch>& ext,
                  double tol) {
    std::vector<Vec3> r, e;
    for (const auto& b : ref)
        for (const auto& p : b.points) r.push_back(p.vec());
    for (const auto& b : ext)
        for (const auto& p : b.points) e.push_back(p.vec());
    if (r.empty() && e.empty()) return kNaN;
    const double tol2 = tol * tol;
    auto matched = [&](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        std::size_t count = 0;
        for (const auto& p : from)
            if (std::any_of(to.begin(), to.end(), [&](const Vec3& q) { return (p - q).squaredNorm() <= tol2; }))
                ++count;
        return count;
    };
    return double(matched(r, e) + matched(e, r)) / double(r.size() + e.size());
}

ReconnectionCounts& ReconnectionCounts::operator+=(const ReconnectionCounts& o) {
    tp_b += o.tp_b;
    tp_s += o.tp_s;
    tn_b += o.tn_b;
    fp_b += o.fp_b;
    fp_s += o.fp_s;
    fn_b += o.fn_b;
    return *this;
}

RecMetrics rec_metrics(const ReconnectionCounts& c) {
    const double tp = double(c.tp_b + c.tp_s), fp = double(c.fp_b + c.fp_s);
    const double tn = double(c.tn_b), fn = double(c.fn_b);
    auto div = [](double n, double d) { return d == 0.0 ? kNaN : n / d; };
    return {div(tp + tn, tp + tn + fp + fn), div(tp, tp + fn), div(tn, tn + fp)};
}

std::string metric_report_json(const MetricReport& r) {
    auto field = [](const std::optional<double>& v) -> nlohmann::json {
        if (!v || !std::isfinite(*v)) return nullptr;
        return *v;
    };
    nlohmann::ordered_json j;
    j["dice"] = field(r.dice);
    j["hd95_mm"] = field(r.hd95_mm);
    j["ov"] = field(r.ov);
    j["rec_acc"] = field(r.rec_acc);
    j["rec_sen"] = field(r.rec_sen);
    j["rec_spe"] = field(r.rec_spe);
    j["l_dscl"] = field(r.l_dscl);
    j["joint_loss"] = field(r.joint_loss);
    return j.dump();
}

}  // namespace vr::topo
