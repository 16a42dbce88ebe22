#include "common/curve.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace vr {

namespace {

Vec3 catmull_rom(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3, double t) {
    const double t2 = t * t, t3 = t2 * t;
    return 0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3);
}

struct Fine {
    std::vector<Vec3> p;
    std::vector<double> param;
};

std::vector<CurveSample> resample(const Fine& fine, double step) {
    std::vector<double> s(fine.p.size(), 0.0);
    for (std::size_t i = 1; i < fine.p.size(); ++i) s[i] = s[i - 1] + (fine.p[i] - fine.p[i - 1]).norm();
    const double total = s.back();
    std::vector<CurveSample> out;
    if (total == 0.0) {
        out.push_back({fine.p.front(), Vec3::UnitX(), 0.0, 0.0});
        return out;
    }
    const auto count = static_cast<std::size_t>(std::floor(total / step + 1e-9));
    std::size_t seg = 0;
    for (std::size_t n = 0; n <= count + 1; ++n) {
        double target = std::min(double(n) * step, total);
        if (n == count + 1) {
            if (total - double(count) * step < 1e-9) break;
            target = total;
        }
        while (seg + 2 < s.size() && s[seg + 1] < target) ++seg;
        const double len = s[seg + 1] - s[seg];
        const double f = len > 0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
        CurveSample c;
        c.p = fine.p[seg] + f * (fine.p[seg + 1] - fine.p[seg]);
        c.tangent = normalized_or_zero(fine.p[seg + 1] - fine.p[seg]);
        c.s = target;
        c.param = fine.param[seg] + f * (fine.param[seg + 1] - fine.param[seg]);
        out.push_back(c);
    }
    return out;
}

}  // namespace

std::vector<CurveSample> catmull_rom_dense(const std::vector<Vec3>& control, double step) {
    if (control.size() < 2) fail(ErrorCode::InvalidArgument, "a curve needs at least two control points");
    if (!(step > 0.0)) fail(ErrorCode::InvalidArgument, "curve step must be positive");
    constexpr int kSub = 64;
    Fine fine;
    const std::size_t n = control.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Vec3& p0 = control[i == 0 ? 0 : i - 1];
        const Vec3& p3 = control[std::min(i + 2, n - 1)];
        for (int k = (i == 0 ? 0 : 1); k <= kSub; ++k) {
            const double t = double(k) / kSub;
            fine.p.push_back(catmull_rom(p0, control[i], control[i + 1], p3, t));
            fine.param.push_back(double(i) + t);
        }
    }
    return resample(fine, step);
}

std::vector<CurveSample> polyline_dense(const std::vector<Vec3>& points, double step) {
    if (points.size() < 2) fail(ErrorCode::InvalidArgument, "a polyline needs at least two points");
    if (!(step > 0.0)) fail(ErrorCode::InvalidArgument, "curve step must be positive");
    Fine fine;
    for (std::size_t i = 0; i < points.size(); ++i) {
        fine.p.push_back(points[i]);
        fine.param.push_back(double(i));
    }
    return resample(fine, step);
}

}  // namespace vr
