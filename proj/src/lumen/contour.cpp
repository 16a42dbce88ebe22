#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "common/error.hpp"
#include "common/parallel.hpp"
#include "common/random.hpp"
#include "lumen/lumen.hpp"

namespace vr::lumen {

Contour grow_contour(const SectionSdf& sdf, int n, double sdf_center, const GrowParams& params) {
    if (n < 8) fail(ErrorCode::InvalidArgument, "contour needs at least 8 rays");
    if (!(params.step > 0.0)) fail(ErrorCode::InvalidArgument, "contour step must be positive");
    const double lower = std::max(sdf_center, params.min_radius);
    const double upper = std::max(params.clamp_factor * sdf_center, lower);
    Contour c;
    c.n = n;
    c.points.reserve(n);
    c.radii.reserve(n);
    for (int k = 0; k < n; ++k) {
        const double theta = 2.0 * kPi * k / n;
        const Vec2 dir(std::cos(theta), std::sin(theta));
        double radius = lower;
        double r = lower;
        double prev = sdf.at(lower * dir);
        if (prev > 0.0) {
            while (r < upper) {
                const double rn = std::min(r + params.step, upper);
                const double cur = sdf.at(rn * dir);
                if (cur <= 0.0) {
                    radius = std::abs(cur) < std::abs(prev) ? rn : r;
                    break;
                }
                prev = cur;
                r = rn;
            }
        }
        c.radii.push_back(radius);
        c.points.push_back(radius * dir);
    }
    return c;
}

std::vector<double> weighted_centers(const std::vector<double>& centers, double w_prev, double w_self, double w_next) {
    const std::size_t n = centers.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = w_self * centers[i];
        double weight = w_self;
        if (i > 0) {
            sum += w_prev * centers[i - 1];
            weight += w_prev;
        }
        if (i + 1 < n) {
            sum += w_next * centers[i + 1];
            weight += w_next;
        }
        out[i] = weight > 0.0 ? sum / weight : centers[i];
    }
    return out;
}

int NPolicy::choose(double sdf_center) const {
    if (kind == NPolicyKind::Fixed) return fixed;
    const double v = std::max(4.0 * sdf_center, 8.0);
    return static_cast<int>(std::min(std::round(v), double(cap)));
}

std::vector<StationContour> contour_pipeline(const std::vector<VoxelCoord>& centerline, const Volume& vol,
                                             const SdfOracle& oracle, const ContourParams& params) {
    if (centerline.empty()) fail(ErrorCode::TooShort, "contour pipeline needs a centerline point");
    const std::size_t n = centerline.size();
    std::vector<Vec3> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = vol.to_mm(centerline[i]);
    const auto tangents = n == 1 ? std::vector<Vec3>{Vec3::UnitZ()} : polyline_tangents(pos, params.tangent_window);
    const auto frames = rmf_frames(pos, tangents);
    std::vector<double> arc(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) arc[i] = arc[i - 1] + (pos[i] - pos[i - 1]).norm();

    std::vector<StationContour> out(n);
    std::vector<std::unique_ptr<SectionSdf>> fields(n);
    std::vector<double> raw(n);
    parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const CrossSection cs =
                extract_cross_section(vol, pos[i], frames[i], params.width, params.height, params.pixel_spacing);
            fields[i] = oracle.predict(cs);
            raw[i] = fields[i]->at(Vec2::Zero());
            out[i].station = static_cast<int>(i);
            out[i].t = arc.back() > 0.0 ? arc[i] / arc.back() : 0.0;
            out[i].center = pos[i];
            out[i].frame = frames[i];
            out[i].pixel_spacing = cs.pixel_spacing;
        }
    });
    const auto& w = params.center_weights;
    const auto centers = weighted_centers(raw, w[0], w[1], w[2]);
    parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            out[i].sdf_center = centers[i];
            out[i].contour = grow_contour(*fields[i], params.n_policy.choose(centers[i]), centers[i], params.grow);
        }
    });
    return out;
}

std::string contours_to_jsonl(const std::vector<StationContour>& stations) {
    auto vec = [](const Vec3& v) { return nlohmann::ordered_json::array({v.x(), v.y(), v.z()}); };
    std::ostringstream os;
    for (const auto& s : stations) {
        nlohmann::ordered_json j;
        j["t"] = s.t;
        j["station"] = s.station;
        j["center"] = vec(s.center);
        j["frame"] = {{"tangent", vec(s.frame.tangent)}, {"normal", vec(s.frame.normal)}, {"binormal", vec(s.frame.binormal)}};
        j["sdf_center"] = s.sdf_center * s.pixel_spacing;
        j["n"] = s.contour.n;
        auto pts = nlohmann::ordered_json::array();
        for (const auto& p : s.contour.points)
            pts.push_back({p.x() * s.pixel_spacing, p.y() * s.pixel_spacing});
        j["points"] = std::move(pts);
        os << j.dump() << '\n';
    }
    return os.str();
}

std::vector<TrainingPair> sample_training_pairs(const CrossSection& cs, const GridSdf& gt, const SamplingPolicy& policy) {
    if (gt.width() != cs.width || gt.height() != cs.height) fail(ErrorCode::SizeMismatch, "ground-truth sdf size differs");
    const double max_sdf = gt.max_value();
    std::size_t count = 0;
    if (policy.count == SamplingPolicy::Count::Fixed)
        count = static_cast<std::size_t>(std::max(0, policy.fixed));
    else if (max_sdf > 0.0)
        count = static_cast<std::size_t>(std::lround(policy.factor * max_sdf));
    const double spread = std::max(policy.variance_floor, policy.variance_scale * std::max(max_sdf, 0.0));
    const double sd = policy.spread_is_variance ? std::sqrt(spread) : spread;
    const double hx = 0.5 * cs.width, hy = 0.5 * cs.height;

    std::vector<TrainingPair> out;
    out.reserve(count);
    Gaussian g(policy.seed);
    for (std::size_t i = 0; i < count; ++i) {
        const double ox = std::clamp(sd * g(), -hx, hx);
        const double oy = std::clamp(sd * g(), -hy, hy);
        const Vec2 o(ox, oy);
        out.push_back({cs.to_normalized(o), gt.at(o)});
    }
    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x) {
            if (gt.pixel(x, y) <= 0.0) continue;
            bool edge = false;
            const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
            for (int d = 0; d < 4 && !edge; ++d) {
                const int nx = x + dx[d], ny = y + dy[d];
                edge = nx >= 0 && ny >= 0 && nx < gt.width() && ny < gt.height() && gt.pixel(nx, ny) <= 0.0;
            }
            if (edge) out.push_back({cs.to_normalized(cs.offset(x, y)), gt.pixel(x, y)});
        }
    return out;
}

double mse_supervision(const std::vector<double>& predicted, const std::vector<double>& target) {
    if (predicted.size() != target.size()) fail(ErrorCode::SizeMismatch, "mse inputs differ in length");
    if (predicted.empty()) fail(ErrorCode::InvalidArgument, "mse of no samples");
    double s = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) s += (predicted[i] - target[i]) * (predicted[i] - target[i]);
    return s / double(predicted.size());
}

}  // namespace vr::lumen
