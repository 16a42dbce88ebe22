#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "lumen/lumen.hpp"
#include "volgrid/volume.hpp"

namespace vr::ies {

// Blending weights over station parameters.
class BlendBasis {
public:
    virtual ~BlendBasis() = default;
    virtual std::size_t size() const = 0;
    // Nonzero (station, weight) pairs at t; empty outside the covered span.
    virtual void evaluate(double t, std::vector<std::pair<int, double>>& out) const = 0;
};

// Compactly supported C2 bumps (Wendland) centred on the stations, normalised
// pointwise to a partition of unity.
class PspsBasis : public BlendBasis {
public:
    // support_radius <= 0 picks twice the largest station gap.
    explicit PspsBasis(std::vector<double> stations, double support_radius = 0.0);

    std::size_t size() const override { return stations_.size(); }
    void evaluate(double t, std::vector<std::pair<int, double>>& out) const override;
    std::vector<double> weights(double t) const;
    bool covers(double t) const;

    const std::vector<double>& stations() const { return stations_; }
    double support_radius() const { return radius_; }

    // (1 - s)^4 (4 s + 1) on [0, 1), zero beyond.
    static double bump(double s);

private:
    std::vector<double> stations_;
    double radius_ = 1.0;
};

// Exact signed distance (mm, positive inside) to a closed polygon in the
// section plane.
class ContourSection {
public:
    ContourSection() = default;
    explicit ContourSection(std::vector<Vec2> points);
    double value(double u, double v) const;
    double extent() const { return extent_; }  // largest distance of a vertex from the origin
    const std::vector<Vec2>& points() const { return points_; }

private:
    std::vector<Vec2> points_;
    double extent_ = 0.0;
};

struct TubeParams {
    double support_factor = 2.0;  // basis support radius in units of the largest station gap
    double cap_margin = 0.5;      // mm past the end stations
};

struct TubeModel {
    std::vector<Vec3> centers;  // mm
    std::vector<lumen::Frame> frames;
    std::vector<ContourSection> sections;
    std::vector<double> t;       // normalised arc length per station
    std::vector<double> arc;     // mm per station
    std::shared_ptr<const BlendBasis> basis;
    double cap_margin = 0.5;

    bool empty() const { return centers.empty(); }
    double length() const { return arc.empty() ? 0.0 : arc.back(); }
    double extent() const;
};

TubeModel build_tube_model(std::vector<Vec3> centers, std::vector<lumen::Frame> frames,
                           std::vector<ContourSection> sections, const TubeParams& params = {});
// Contours are converted from pixels to section-local mm.
TubeModel build_tube_model(const std::vector<lumen::StationContour>& stations, const TubeParams& params = {});

struct ImplicitCoords {
    double t = 0.0;
    double u = 0.0;
    double v = 0.0;
};

// t is the centerline parameter whose section plane (normal to the blended
// tangent) contains q, the nearest one when several do; (u, v) are the
// offsets of q along the blended frame normal and binormal there. Within
// cap_margin beyond an end plane the end station is used.
std::optional<ImplicitCoords> implicit_coords(const TubeModel& model, const Vec3& q);

inline constexpr double kOutsideValue = -1.0e6;

// Sum of section values weighted by the blending basis; kOutsideValue where
// the coordinates are undefined.
double implicit_value(const TubeModel& model, const Vec3& q);

// 1 where the implicit value at the voxel centre reaches iso. Only voxels
// near the model's segments are evaluated.
Volume voxelize(const TubeModel& model, const Dims& dims, const Spacing& spacing, double iso = 0.0);
void voxelize_into(Volume& mask, const TubeModel& model, double iso = 0.0);

Volume merge(const Volume& reconstructed, const Volume& refined);

using Triangle = std::array<Vec3, 3>;

// Marching cubes over a scalar grid sampled at voxel centres (x fastest);
// vertices in mm. The surface separates values >= iso from values < iso.
std::vector<Triangle> marching_cubes(const std::vector<double>& field, const Dims& dims, const Spacing& spacing,
                                     double iso = 0.0);
std::vector<Triangle> surface_mesh(const TubeModel& model, const Dims& dims, const Spacing& spacing, double iso = 0.0);
void write_stl(const std::filesystem::path& path, const std::vector<Triangle>& triangles);

}  // namespace vr::ies
