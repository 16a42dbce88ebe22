#pragma once

#include <vector>

#include "common/geometry.hpp"

namespace vr {

struct CurveSample {
    Vec3 p;
    Vec3 tangent;  // unit
    double s = 0.0;      // arc length from the first sample
    double param = 0.0;  // spline parameter, integer at control points
};

// Uniform Catmull-Rom spline through `control` (end points duplicated),
// resampled at equal arc-length steps. Two control points give a segment.
std::vector<CurveSample> catmull_rom_dense(const std::vector<Vec3>& control, double step);

// Arc-length resampling of a polyline.
std::vector<CurveSample> polyline_dense(const std::vector<Vec3>& points, double step);

}  // namespace vr
