#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/parallel.hpp"
#include "lumen/lumen.hpp"
#include "volgrid/ops.hpp"

namespace vr::lumen {

Frame initial_frame(const Vec3& tangent) {
    const double n = tangent.norm();
    if (!(n > 0.0) || !std::isfinite(n)) fail(ErrorCode::DegenerateTangent, "cross section tangent is zero");
    Frame f;
    f.tangent = tangent / n;
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (std::abs(f.tangent[a]) < std::abs(f.tangent[axis])) axis = a;
    Vec3 e = Vec3::Zero();
    e[axis] = 1.0;
    f.normal = (e - e.dot(f.tangent) * f.tangent).normalized();
    f.binormal = f.tangent.cross(f.normal);
    return f;
}

std::vector<Vec3> polyline_tangents(const std::vector<Vec3>& positions, int half_window) {
    const int n = static_cast<int>(positions.size());
    if (n < 2) fail(ErrorCode::DegenerateTangent, "tangents need at least two points");
    half_window = std::max(1, half_window);
    std::vector<Vec3> out(n);
    for (int i = 0; i < n; ++i) {
        const int a = std::max(0, i - half_window);
        const int b = std::min(n - 1, i + half_window);
        const Vec3 d = positions[b] - positions[a];
        if (d.norm() == 0.0) fail(ErrorCode::DegenerateTangent, "zero tangent along centerline");
        out[i] = d.normalized();
    }
    return out;
}

std::vector<Frame> rmf_frames(const std::vector<Vec3>& positions, const std::vector<Vec3>& tangents) {
    if (positions.size() != tangents.size()) fail(ErrorCode::InvalidArgument, "positions and tangents differ in length");
    std::vector<Frame> frames;
    if (positions.empty()) return frames;
    frames.reserve(positions.size());
    frames.push_back(initial_frame(tangents[0]));
    for (std::size_t i = 0; i + 1 < positions.size(); ++i) {
        const Frame& f = frames.back();
        const Vec3 t1 = tangents[i + 1].normalized();
        Vec3 r = f.normal;
        const Vec3 v1 = positions[i + 1] - positions[i];
        const double c1 = v1.squaredNorm();
        Vec3 tl = f.tangent;
        if (c1 > 0.0) {
            r = r - (2.0 / c1) * v1.dot(r) * v1;
            tl = tl - (2.0 / c1) * v1.dot(tl) * v1;
        }
        const Vec3 v2 = t1 - tl;
        const double c2 = v2.squaredNorm();
        if (c2 > 0.0) r = r - (2.0 / c2) * v2.dot(r) * v2;
        Frame next;
        next.tangent = t1;
        next.normal = (r - r.dot(t1) * t1).normalized();
        next.binormal = t1.cross(next.normal);
        frames.push_back(next);
    }
    return frames;
}

CrossSection extract_cross_section(const Volume& vol, const Vec3& center_mm, const Frame& frame, int width, int height,
                                   double pixel_spacing) {
    if (vol.empty()) fail(ErrorCode::InvalidArgument, "cross section of an empty volume");
    if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "cross section size must be positive");
    if (frame.tangent.norm() == 0.0) fail(ErrorCode::DegenerateTangent, "cross section tangent is zero");
    CrossSection cs;
    cs.center = center_mm;
    cs.frame = frame;
    cs.width = width;
    cs.height = height;
    cs.pixel_spacing = pixel_spacing > 0.0 ? pixel_spacing : vol.spacing().min();
    cs.pixels.resize(static_cast<std::size_t>(width) * height);
    cs.in_volume.assign(cs.pixels.size(), 0);
    const double outside = vol.min_value();
    const Spacing& sp = vol.spacing();
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Vec3 mm = cs.position(cs.offset(x, y));
            const Vec3 p(mm.x() / sp.sx, mm.y() / sp.sy, mm.z() / sp.sz);
            const std::size_t id = static_cast<std::size_t>(y) * width + x;
            cs.pixels[id] = static_cast<float>(vol.trilinear(p, outside));
            const Dims& d = vol.dims();
            cs.in_volume[id] = p.x() >= 0 && p.y() >= 0 && p.z() >= 0 && p.x() <= d.nx - 1 && p.y() <= d.ny - 1 &&
                               p.z() <= d.nz - 1;
        }
    }
    return cs;
}

CrossSection extract_cross_section(const Volume& vol, const Vec3& center_mm, const Vec3& tangent, int width, int height,
                                   double pixel_spacing) {
    return extract_cross_section(vol, center_mm, initial_frame(tangent), width, height, pixel_spacing);
}

GridSdf::GridSdf(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (width <= 0 || height <= 0 || values_.size() != static_cast<std::size_t>(width) * height)
        fail(ErrorCode::SizeMismatch, "sdf grid size mismatch");
}

double GridSdf::at(const Vec2& offset_px) const {
    const double fx = std::clamp(offset_px.x() + 0.5 * (width_ - 1), 0.0, double(width_ - 1));
    const double fy = std::clamp(offset_px.y() + 0.5 * (height_ - 1), 0.0, double(height_ - 1));
    const int x0 = std::min(static_cast<int>(fx), width_ - 1);
    const int y0 = std::min(static_cast<int>(fy), height_ - 1);
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double ax = fx - x0;
    const double ay = fy - y0;
    const double top = (1 - ax) * pixel(x0, y0) + ax * pixel(x1, y0);
    const double bottom = (1 - ax) * pixel(x0, y1) + ax * pixel(x1, y1);
    return (1 - ay) * top + ay * bottom;
}

double GridSdf::max_value() const { return *std::max_element(values_.begin(), values_.end()); }

GridSdf signed_distance(int width, int height, const std::vector<std::uint8_t>& inside) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (inside.size() != n) fail(ErrorCode::SizeMismatch, "mask size mismatch");
    const std::size_t count = static_cast<std::size_t>(std::count_if(inside.begin(), inside.end(), [](auto v) { return v != 0; }));
    const double far = std::max(width, height);
    if (count == 0) return GridSdf(width, height, std::vector<double>(n, -far));
    Volume mask({width, height, 1}, {}, VolumeKind::BinaryMask);
    for (std::size_t i = 0; i < n; ++i) mask.data()[i] = inside[i] ? 1.0f : 0.0f;
    const std::vector<double> to_inside = squared_dt(mask, true, {});
    std::vector<double> to_outside;
    if (count < n) to_outside = squared_dt(mask, false, {});
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (inside[i])
            values[i] = (count < n ? std::sqrt(to_outside[i]) : far) - 0.5;
        else
            values[i] = -(std::sqrt(to_inside[i]) - 0.5);
    }
    return GridSdf(width, height, std::move(values));
}

namespace {

struct Segment {
    Vec2 a, b;
};

double segment_distance2(const Segment& s, const Vec2& p) {
    const Vec2 e = s.b - s.a;
    const double len2 = e.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - s.a).dot(e) / len2, 0.0, 1.0) : 0.0;
    return (p - (s.a + t * e)).squaredNorm();
}

// Marching squares over pixel centres; crossings are placed by linear
// interpolation along each cell edge.
std::vector<Segment> zero_isoline(int w, int h, const std::vector<double>& level) {
    std::vector<Segment> out;
    auto at = [&](int x, int y) { return level[static_cast<std::size_t>(y) * w + x]; };
    auto cross = [](const Vec2& p, const Vec2& q, double a, double b) { return p + (a / (a - b)) * (q - p); };
    for (int y = 0; y + 1 < h; ++y)
        for (int x = 0; x + 1 < w; ++x) {
            const Vec2 c[4] = {{double(x), double(y)}, {x + 1.0, double(y)}, {x + 1.0, y + 1.0}, {double(x), y + 1.0}};
            const double v[4] = {at(x, y), at(x + 1, y), at(x + 1, y + 1), at(x, y + 1)};
            Vec2 pts[4];
            int edge_of[4];
            int count = 0;
            for (int e = 0; e < 4; ++e) {
                const int f = (e + 1) % 4;
                if ((v[e] > 0.0) != (v[f] > 0.0)) {
                    edge_of[count] = e;
                    pts[count++] = cross(c[e], c[f], v[e], v[f]);
                }
            }
            if (count == 2) {
                out.push_back({pts[0], pts[1]});
            } else if (count == 4) {
                // Saddle: the centre value decides which corners are joined.
                const bool centre_inside = (v[0] + v[1] + v[2] + v[3]) > 0.0;
                const bool first_inside = v[0] > 0.0;
                if (centre_inside == first_inside) {
                    out.push_back({pts[0], pts[3]});
                    out.push_back({pts[1], pts[2]});
                } else {
                    out.push_back({pts[0], pts[1]});
                    out.push_back({pts[2], pts[3]});
                }
                (void)edge_of;
            }
        }
    return out;
}

}  // namespace

GridSdf isoline_signed_distance(int width, int height, const std::vector<double>& level) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (level.size() != n) fail(ErrorCode::SizeMismatch, "level size mismatch");
    const auto segments = zero_isoline(width, height, level);
    const double far = std::max(width, height);
    std::vector<double> values(n);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * width + x;
            double best = far * far;
            const Vec2 p(x, y);
            for (const auto& s : segments) best = std::min(best, segment_distance2(s, p));
            values[i] = level[i] > 0.0 ? std::sqrt(best) : -std::sqrt(best);
        }
    return GridSdf(width, height, std::move(values));
}

double otsu_threshold(const std::vector<float>& values, int bins) {
    if (values.empty()) fail(ErrorCode::InvalidArgument, "otsu threshold of no values");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) return hi;
    std::vector<double> hist(bins, 0.0);
    const double width = (hi - lo) / bins;
    for (float v : values) hist[std::min(bins - 1, static_cast<int>((v - lo) / width))] += 1.0;
    const double total = static_cast<double>(values.size());
    double sum_all = 0.0;
    for (int b = 0; b < bins; ++b) sum_all += b * hist[b];
    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    int best_bin = 0;
    for (int b = 0; b < bins - 1; ++b) {
        w0 += hist[b];
        sum0 += b * hist[b];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0;
        const double m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_bin = b;
        }
    }
    return lo + (best_bin + 1) * width;
}

double intermeans_threshold(const std::vector<float>& values, double start) {
    double t = start;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double tol = 1e-6 * std::max(1e-12, double(*hi - *lo));
    for (int it = 0; it < 100; ++it) {
        double s0 = 0.0, s1 = 0.0;
        std::size_t n0 = 0, n1 = 0;
        for (float v : values) {
            if (v < t) {
                s0 += v;
                ++n0;
            } else {
                s1 += v;
                ++n1;
            }
        }
        if (n0 == 0 || n1 == 0) break;
        const double next = 0.5 * (s0 / double(n0) + s1 / double(n1));
        const bool done = std::abs(next - t) <= tol;
        t = next;
        if (done) break;
    }
    return t;
}

std::unique_ptr<SectionSdf> ThresholdSdfOracle::predict(const CrossSection& cs) const {
    const int w = cs.width, h = cs.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<std::uint8_t> fg(n, 0);
    const bool masked = cs.in_volume.size() == n;
    std::vector<float> inside;
    inside.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!masked || cs.in_volume[i]) inside.push_back(cs.pixels[i]);
    double thr = 0.0, span = 1.0;
    if (!inside.empty()) {
        thr = intermeans_threshold(inside, otsu_threshold(inside));
        const auto [lo, hi] = std::minmax_element(inside.begin(), inside.end());
        span = std::max(1e-12, double(*hi - *lo));
        if (*hi > *lo)
            for (std::size_t i = 0; i < n; ++i) fg[i] = (!masked || cs.in_volume[i]) && cs.pixels[i] >= thr ? 1 : 0;
    }
    const double tiny = 1e-6 * span;
    // Flood fill (8-connected) from the pixel nearest the center.
    std::vector<std::uint8_t> keep(n, 0);
    std::vector<std::pair<int, int>> seeds;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Vec2 o = cs.offset(x, y);
            if (std::abs(o.x()) < 1.0 && std::abs(o.y()) < 1.0 && fg[static_cast<std::size_t>(y) * w + x])
                seeds.emplace_back(x, y);
        }
    for (auto [sx, sy] : seeds) {
        std::vector<std::pair<int, int>> stack{{sx, sy}};
        keep[static_cast<std::size_t>(sy) * w + sx] = 1;
        while (!stack.empty()) {
            const auto [x, y] = stack.back();
            stack.pop_back();
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t id = static_cast<std::size_t>(ny) * w + nx;
                    if (fg[id] && !keep[id]) {
                        keep[id] = 1;
                        stack.emplace_back(nx, ny);
                    }
                }
        }
    }
    if (std::none_of(keep.begin(), keep.end(), [](auto v) { return v != 0; }) ||
        std::all_of(keep.begin(), keep.end(), [](auto v) { return v != 0; }))
        return std::make_unique<GridSdf>(signed_distance(w, h, keep));
    std::vector<double> level(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = cs.pixels[i] - thr;
        level[i] = keep[i] ? std::max(g, tiny) : std::min(masked && !cs.in_volume[i] ? -span : g, -tiny);
    }
    return std::make_unique<GridSdf>(isoline_signed_distance(w, h, level));
}

}  // namespace vr::lumen
