#include "ies/ies.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/parallel.hpp"

namespace vr::ies {

double PspsBasis::bump(double s) {
    if (s >= 1.0) return 0.0;
    const double a = 1.0 - s;
    return a * a * a * a * (4.0 * s + 1.0);
}

PspsBasis::PspsBasis(std::vector<double> stations, double support_radius) : stations_(std::move(stations)) {
    if (stations_.empty()) fail(ErrorCode::InvalidArgument, "blending basis needs at least one station");
    for (std::size_t i = 0; i < stations_.size(); ++i) {
        if (!std::isfinite(stations_[i])) fail(ErrorCode::InvalidArgument, "station parameter is not finite");
        if (i > 0 && stations_[i] <= stations_[i - 1]) fail(ErrorCode::InvalidArgument, "stations must increase");
    }
    if (support_radius > 0.0) {
        radius_ = support_radius;
    } else {
        double gap = 0.0;
        for (std::size_t i = 1; i < stations_.size(); ++i) gap = std::max(gap, stations_[i] - stations_[i - 1]);
        radius_ = gap > 0.0 ? 2.0 * gap : 1.0;
    }
}

void PspsBasis::evaluate(double t, std::vector<std::pair<int, double>>& out) const {
    out.clear();
    const auto lo = std::upper_bound(stations_.begin(), stations_.end(), t - radius_);
    double sum = 0.0;
    for (auto it = lo; it != stations_.end() && *it < t + radius_; ++it) {
        const double w = bump(std::abs(t - *it) / radius_);
        if (w <= 0.0) continue;
        out.emplace_back(static_cast<int>(it - stations_.begin()), w);
        sum += w;
    }
    if (!(sum > 0.0)) {
        out.clear();
        return;
    }
    for (auto& [i, w] : out) w /= sum;
}

std::vector<double> PspsBasis::weights(double t) const {
    std::vector<std::pair<int, double>> nz;
    evaluate(t, nz);
    std::vector<double> w(stations_.size(), 0.0);
    for (const auto& [i, v] : nz) w[i] = v;
    return w;
}

bool PspsBasis::covers(double t) const {
    std::vector<std::pair<int, double>> nz;
    evaluate(t, nz);
    return !nz.empty();
}

ContourSection::ContourSection(std::vector<Vec2> points) : points_(std::move(points)) {
    if (points_.size() < 3) fail(ErrorCode::InvalidArgument, "section contour needs at least three points");
    for (const auto& p : points_) extent_ = std::max(extent_, p.norm());
}

double ContourSection::value(double u, double v) const {
    const Vec2 q(u, v);
    double best = 1e300;
    bool inside = false;
    const std::size_t n = points_.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = points_[j];
        const Vec2& b = points_[i];
        const Vec2 e = b - a;
        const double len2 = e.squaredNorm();
        const double lambda = len2 > 0.0 ? std::clamp((q - a).dot(e) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, (q - (a + lambda * e)).squaredNorm());
        if ((a.y() > v) != (b.y() > v)) {
            const double x = a.x() + (v - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (u < x) inside = !inside;
        }
    }
    const double d = std::sqrt(best);
    return inside ? d : -d;
}

double TubeModel::extent() const {
    double e = 0.0;
    for (const auto& s : sections) e = std::max(e, s.extent());
    return e;
}

TubeModel build_tube_model(std::vector<Vec3> centers, std::vector<lumen::Frame> frames,
                           std::vector<ContourSection> sections, const TubeParams& params) {
    if (centers.size() < 2) fail(ErrorCode::TooShort, "tube model needs at least two stations");
    if (frames.size() != centers.size() || sections.size() != centers.size())
        fail(ErrorCode::SizeMismatch, "station, frame and section counts differ");
    TubeModel m;
    m.arc.assign(centers.size(), 0.0);
    for (std::size_t i = 1; i < centers.size(); ++i) m.arc[i] = m.arc[i - 1] + (centers[i] - centers[i - 1]).norm();
    if (!(m.arc.back() > 0.0)) fail(ErrorCode::DegenerateTangent, "tube model centerline has zero length");
    m.t.resize(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i) m.t[i] = m.arc[i] / m.arc.back();
    double gap = 0.0;
    for (std::size_t i = 1; i < m.t.size(); ++i) gap = std::max(gap, m.t[i] - m.t[i - 1]);
    m.basis = std::make_shared<PspsBasis>(m.t, params.support_factor * gap);
    m.centers = std::move(centers);
    m.frames = std::move(frames);
    m.sections = std::move(sections);
    m.cap_margin = params.cap_margin;
    return m;
}

TubeModel build_tube_model(const std::vector<lumen::StationContour>& stations, const TubeParams& params) {
    std::vector<Vec3> centers;
    std::vector<lumen::Frame> frames;
    std::vector<ContourSection> sections;
    for (const auto& s : stations) {
        // Consecutive duplicate centers carry no direction; keep the first.
        if (!centers.empty() && (s.center - centers.back()).norm() == 0.0) continue;
        centers.push_back(s.center);
        frames.push_back(s.frame);
        std::vector<Vec2> pts;
        pts.reserve(s.contour.points.size());
        for (const auto& p : s.contour.points) pts.push_back(p * s.pixel_spacing);
        sections.emplace_back(std::move(pts));
    }
    return build_tube_model(std::move(centers), std::move(frames), std::move(sections), params);
}

namespace {

// Frame blended between two stations, re-orthogonalised around the blended tangent.
lumen::Frame blend_frame(const lumen::Frame& f0, const lumen::Frame& f1, double l, const Vec3& fallback) {
    lumen::Frame f;
    f.tangent = normalized_or_zero((1 - l) * f0.tangent + l * f1.tangent);
    if (f.tangent.isZero()) f.tangent = fallback;
    Vec3 normal = (1 - l) * f0.normal + l * f1.normal;
    normal -= normal.dot(f.tangent) * f.tangent;
    if (normal.norm() < 1e-12) normal = f0.normal - f0.normal.dot(f.tangent) * f.tangent;
    f.normal = normal.normalized();
    f.binormal = f.tangent.cross(f.normal);
    return f;
}

}  // namespace

std::optional<ImplicitCoords> implicit_coords(const TubeModel& model, const Vec3& q) {
    const std::size_t n = model.centers.size();
    if (n < 2) return std::nullopt;
    constexpr double kSlack = 1e-9;
    std::size_t seg = 0;
    double best = 1e300, best_lambda = 0.0;
    auto consider = [&](std::size_t i, double lambda) {
        const Vec3 e = model.centers[i + 1] - model.centers[i];
        const double d = (q - (model.centers[i] + lambda * e)).squaredNorm();
        if (d < best) {
            best = d;
            seg = i;
            best_lambda = lambda;
        }
    };
    // Parameters where q lies in the plane normal to the blended tangent:
    // (w - s e) . (t0 + s dt) = 0.
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Vec3 w = q - model.centers[i];
        const Vec3 e = model.centers[i + 1] - model.centers[i];
        const Vec3& t0 = model.frames[i].tangent;
        const Vec3 dt = model.frames[i + 1].tangent - t0;
        const double a = -e.dot(dt), b = w.dot(dt) - e.dot(t0), c = w.dot(t0);
        double roots[2];
        int count = 0;
        if (std::abs(a) < 1e-12) {
            if (std::abs(b) > 1e-15) roots[count++] = -c / b;
        } else {
            const double disc = b * b - 4 * a * c;
            if (disc >= 0.0) {
                const double r = std::sqrt(disc);
                const double k = b >= 0.0 ? -0.5 * (b + r) : -0.5 * (b - r);
                roots[count++] = k / a;
                if (k != 0.0) roots[count++] = c / k;
            }
        }
        for (int r = 0; r < count; ++r)
            if (roots[r] >= -kSlack && roots[r] <= 1.0 + kSlack) consider(i, std::clamp(roots[r], 0.0, 1.0));
    }
    // End caps: within cap_margin in front of the first or past the last section plane.
    const double before = (q - model.centers.front()).dot(model.frames.front().tangent);
    if (before < 0.0 && before >= -model.cap_margin) consider(0, 0.0);
    const double after = (q - model.centers.back()).dot(model.frames.back().tangent);
    if (after > 0.0 && after <= model.cap_margin) consider(n - 2, 1.0);
    if (best == 1e300) return std::nullopt;

    const Vec3 a = model.centers[seg];
    const Vec3 e = model.centers[seg + 1] - a;
    const double len = e.norm();
    const double l = best_lambda;
    const lumen::Frame f = blend_frame(model.frames[seg], model.frames[seg + 1], l, e / len);
    const Vec3 d = q - (a + l * e);
    ImplicitCoords c;
    c.t = (model.arc[seg] + l * len) / model.length();
    c.u = d.dot(f.normal);
    c.v = d.dot(f.binormal);
    return c;
}

double implicit_value(const TubeModel& model, const Vec3& q) {
    const auto c = implicit_coords(model, q);
    if (!c || !model.basis) return kOutsideValue;
    thread_local std::vector<std::pair<int, double>> weights;
    model.basis->evaluate(c->t, weights);
    if (weights.empty()) return kOutsideValue;
    double f = 0.0;
    for (const auto& [i, w] : weights) f += w * model.sections[i].value(c->u, c->v);
    return f;
}

namespace {

struct Box {
    int lo[3] = {0, 0, 0};
    int hi[3] = {-1, -1, -1};
    bool empty() const { return hi[0] < lo[0] || hi[1] < lo[1] || hi[2] < lo[2]; }
};

Box model_box(const TubeModel& model, const Dims& dims, const Spacing& sp, double pad_mm) {
    Box box;
    if (model.empty()) return box;
    const double r = model.extent() + model.cap_margin + pad_mm;
    const double s[3] = {sp.sx, sp.sy, sp.sz};
    const int n[3] = {dims.nx, dims.ny, dims.nz};
    for (int ax = 0; ax < 3; ++ax) {
        double lo = 1e300, hi = -1e300;
        for (const auto& c : model.centers) {
            lo = std::min(lo, c[ax]);
            hi = std::max(hi, c[ax]);
        }
        box.lo[ax] = std::max(0, static_cast<int>(std::floor((lo - r) / s[ax])));
        box.hi[ax] = std::min(n[ax] - 1, static_cast<int>(std::ceil((hi + r) / s[ax])));
    }
    return box;
}

}  // namespace

void voxelize_into(Volume& mask, const TubeModel& model, double iso) {
    if (model.empty()) return;
    const Spacing& sp = mask.spacing();
    const double pad = std::sqrt(sp.sx * sp.sx + sp.sy * sp.sy + sp.sz * sp.sz);
    const Box box = model_box(model, mask.dims(), sp, pad);
    if (box.empty()) return;
    const int bx = box.hi[0] - box.lo[0] + 1, by = box.hi[1] - box.lo[1] + 1, bz = box.hi[2] - box.lo[2] + 1;
    std::vector<std::uint8_t> candidate(static_cast<std::size_t>(bx) * by * bz, 0);
    const double r = model.extent() + model.cap_margin + pad;
    for (std::size_t i = 0; i + 1 < model.centers.size(); ++i) {
        int lo[3], hi[3];
        const double s[3] = {sp.sx, sp.sy, sp.sz};
        for (int ax = 0; ax < 3; ++ax) {
            const double a = std::min(model.centers[i][ax], model.centers[i + 1][ax]) - r;
            const double b = std::max(model.centers[i][ax], model.centers[i + 1][ax]) + r;
            lo[ax] = std::max(box.lo[ax], static_cast<int>(std::floor(a / s[ax])));
            hi[ax] = std::min(box.hi[ax], static_cast<int>(std::ceil(b / s[ax])));
        }
        for (int k = lo[2]; k <= hi[2]; ++k)
            for (int j = lo[1]; j <= hi[1]; ++j)
                for (int x = lo[0]; x <= hi[0]; ++x)
                    candidate[(static_cast<std::size_t>(k - box.lo[2]) * by + (j - box.lo[1])) * bx + (x - box.lo[0])] = 1;
    }
    std::vector<std::size_t> cells;
    for (std::size_t c = 0; c < candidate.size(); ++c)
        if (candidate[c]) cells.push_back(c);
    std::vector<std::uint8_t> hit(cells.size(), 0);
    parallel_for(cells.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t n = b; n < e; ++n) {
            const std::size_t c = cells[n];
            const int x = box.lo[0] + static_cast<int>(c % bx);
            const int j = box.lo[1] + static_cast<int>((c / bx) % by);
            const int k = box.lo[2] + static_cast<int>(c / (static_cast<std::size_t>(bx) * by));
            hit[n] = implicit_value(model, mask.to_mm({x, j, k})) >= iso;
        }
    });
    for (std::size_t n = 0; n < cells.size(); ++n) {
        if (!hit[n]) continue;
        const std::size_t c = cells[n];
        const int x = box.lo[0] + static_cast<int>(c % bx);
        const int j = box.lo[1] + static_cast<int>((c / bx) % by);
        const int k = box.lo[2] + static_cast<int>(c / (static_cast<std::size_t>(bx) * by));
        mask(x, j, k) = 1.0f;
    }
}

Volume voxelize(const TubeModel& model, const Dims& dims, const Spacing& spacing, double iso) {
    Volume mask(dims, spacing, VolumeKind::BinaryMask);
    voxelize_into(mask, model, iso);
    return mask;
}

Volume merge(const Volume& reconstructed, const Volume& refined) {
    require_same_dims(reconstructed, refined, "merge");
    Volume out = Volume::like(refined, VolumeKind::BinaryMask);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = (reconstructed.data()[i] != 0.0f || refined.data()[i] != 0.0f) ? 1.0f : 0.0f;
    return out;
}

std::vector<Triangle> surface_mesh(const TubeModel& model, const Dims& dims, const Spacing& spacing, double iso) {
    if (model.empty()) return {};
    const double pad = 2.0 * std::max(spacing.sx, std::max(spacing.sy, spacing.sz));
    const Box box = model_box(model, dims, spacing, pad);
    if (box.empty()) return {};
    const Dims sub{box.hi[0] - box.lo[0] + 1, box.hi[1] - box.lo[1] + 1, box.hi[2] - box.lo[2] + 1};
    std::vector<double> field(sub.count());
    const double floor_value = iso - (model.extent() + pad);
    parallel_for(field.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t n = b; n < e; ++n) {
            const int x = box.lo[0] + static_cast<int>(n % sub.nx);
            const int j = box.lo[1] + static_cast<int>((n / sub.nx) % sub.ny);
            const int k = box.lo[2] + static_cast<int>(n / (static_cast<std::size_t>(sub.nx) * sub.ny));
            const Vec3 p(x * spacing.sx, j * spacing.sy, k * spacing.sz);
            field[n] = std::max(implicit_value(model, p), floor_value);
        }
    });
    auto tris = marching_cubes(field, sub, spacing, iso);
    const Vec3 origin(box.lo[0] * spacing.sx, box.lo[1] * spacing.sy, box.lo[2] * spacing.sz);
    for (auto& t : tris)
        for (auto& v : t) v += origin;
    return tris;
}

}  // namespace vr::ies
