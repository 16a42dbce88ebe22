#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "volgrid/volume.hpp"

namespace vr::lumen {

// Orthonormal frame; positions and directions are in millimetres.
struct Frame {
    Vec3 tangent = Vec3::UnitZ();
    Vec3 normal = Vec3::UnitX();
    Vec3 binormal = Vec3::UnitY();
};

// Deterministic first frame: the normal is the coordinate axis least aligned
// with the tangent, made orthogonal to it. Throws DegenerateTangent.
Frame initial_frame(const Vec3& tangent);

// Rotation-minimizing frames (double reflection) along mm positions with the
// given unit tangents.
std::vector<Frame> rmf_frames(const std::vector<Vec3>& positions, const std::vector<Vec3>& tangents);

// Unit tangents from central differences over `half_window` points.
std::vector<Vec3> polyline_tangents(const std::vector<Vec3>& positions, int half_window = 2);

struct CrossSection {
    Vec3 center = Vec3::Zero();  // mm
    Frame frame;
    int width = 64;
    int height = 64;
    double pixel_spacing = 1.0;  // mm
    std::vector<float> pixels;   // row-major, x fastest
    std::vector<std::uint8_t> in_volume;  // 1 where the sample lies inside the voxel lattice

    float pixel(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    // Pixel offsets of pixel (x, y) from the section center.
    Vec2 offset(int x, int y) const { return {x - 0.5 * (width - 1), y - 0.5 * (height - 1)}; }
    // mm position of a pixel offset.
    Vec3 position(const Vec2& offset_px) const {
        return center + pixel_spacing * (offset_px.x() * frame.normal + offset_px.y() * frame.binormal);
    }
    // Normalised [-1,1]^2 coordinates <-> pixel offsets.
    Vec2 to_offset(const Vec2& p) const { return {p.x() * 0.5 * width, p.y() * 0.5 * height}; }
    Vec2 to_normalized(const Vec2& offset_px) const { return {offset_px.x() / (0.5 * width), offset_px.y() / (0.5 * height)}; }
};

// Trilinear resampling of the plane through `center_mm` spanned by the frame
// normal and binormal. Out-of-volume samples take the volume minimum.
CrossSection extract_cross_section(const Volume& vol, const Vec3& center_mm, const Frame& frame, int width = 64,
                                   int height = 64, double pixel_spacing = 0.0);
CrossSection extract_cross_section(const Volume& vol, const Vec3& center_mm, const Vec3& tangent, int width = 64,
                                   int height = 64, double pixel_spacing = 0.0);

// Signed distance in pixels (positive inside) at pixel offsets from the
// section center.
class SectionSdf {
public:
    virtual ~SectionSdf() = default;
    virtual double at(const Vec2& offset_px) const = 0;
};

// Bilinear interpolation over per-pixel values, edge-clamped.
class GridSdf : public SectionSdf {
public:
    GridSdf(int width, int height, std::vector<double> values);
    double at(const Vec2& offset_px) const override;
    double pixel(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
    int width() const { return width_; }
    int height() const { return height_; }
    double max_value() const;

private:
    int width_, height_;
    std::vector<double> values_;
};

// Signed distance field of a binary pixel mask: inside pixels get the
// distance to the nearest outside pixel minus one half, outside pixels the
// negated distance to the nearest inside pixel minus one half. An empty mask
// yields -max(width, height) everywhere.
GridSdf signed_distance(int width, int height, const std::vector<std::uint8_t>& inside);

class SdfOracle {
public:
    virtual ~SdfOracle() = default;
    virtual std::unique_ptr<SectionSdf> predict(const CrossSection& cs) const = 0;
    // p in normalised section coordinates.
    double query(const CrossSection& cs, const Vec2& p) const { return predict(cs)->at(cs.to_offset(p)); }
};

double otsu_threshold(const std::vector<float>& values, int bins = 256);
// Iterates t = (mean below t + mean above t) / 2 from `start`.
double intermeans_threshold(const std::vector<float>& values, double start);

// Signed distance (px, positive where level > 0) to the zero isoline of a
// per-pixel level field, traced by marching squares between pixel centres.
GridSdf isoline_signed_distance(int width, int height, const std::vector<double>& level);

// Intermeans threshold (seeded by Otsu) over the in-volume pixels and the
// component containing the center. The boundary is placed at sub-pixel
// precision where the intensity crosses the threshold between a kept and a
// discarded pixel; the result is the signed distance to that boundary.
class ThresholdSdfOracle : public SdfOracle {
public:
    std::unique_ptr<SectionSdf> predict(const CrossSection& cs) const override;
};

struct Contour {
    std::vector<Vec2> points;  // pixel offsets in ray order, closed
    std::vector<double> radii;
    int n = 0;
};

struct GrowParams {
    double step = 0.5;        // px along each ray
    double min_radius = 1.0;  // floor of the initial ring
    double clamp_factor = 3.0;
};

// n rays from the center. Each stops at the first +/- sign change of the SDF
// (the sample with the smaller |SDF| is kept), never inside the initial ring
// and never beyond clamp_factor * sdf_center; rays without a sign change
// inside that band stay on the initial ring.
Contour grow_contour(const SectionSdf& sdf, int n, double sdf_center, const GrowParams& params = {});

// Weighted mean of the section-center SDF values (prev, self, next).
std::vector<double> weighted_centers(const std::vector<double>& centers, double w_prev = 0.25, double w_self = 0.5,
                                     double w_next = 0.25);

enum class NPolicyKind { Fixed, Adaptive };

struct NPolicy {
    NPolicyKind kind = NPolicyKind::Fixed;
    int fixed = 20;
    int cap = 16;  // adaptive: min(max(4 * sdf_center, 8), cap)
    int choose(double sdf_center) const;
};

struct ContourParams {
    int width = 64;
    int height = 64;
    double pixel_spacing = 0.0;  // 0: minimum volume spacing
    NPolicy n_policy;
    GrowParams grow;
    std::array<double, 3> center_weights{0.25, 0.5, 0.25};
    int tangent_window = 2;
};

struct StationContour {
    int station = 0;
    double t = 0.0;  // normalised arc length in [0, 1]
    Vec3 center = Vec3::Zero();  // mm
    Frame frame;
    double pixel_spacing = 1.0;
    double sdf_center = 0.0;
    Contour contour;
};

// One contour per centerline point (voxel coordinates).
std::vector<StationContour> contour_pipeline(const std::vector<VoxelCoord>& centerline, const Volume& vol,
                                             const SdfOracle& oracle, const ContourParams& params = {});

// {t, center, frame, points} per line; points in section-local mm.
std::string contours_to_jsonl(const std::vector<StationContour>& stations);

struct TrainingPair {
    Vec2 p;  // normalised section coordinates
    double sdf = 0.0;
};

struct SamplingPolicy {
    enum class Count { Fixed, ScaledMax } count = Count::ScaledMax;
    int fixed = 100;
    double factor = 15.0;          // count = factor * max sdf
    double variance_floor = 10.0;  // spread = max(floor, scale * max sdf)
    double variance_scale = 5.0;
    bool spread_is_variance = true;  // false: the spread is a standard deviation
    std::uint64_t seed = 1;
};

// Normal samples around the section center plus every lumen boundary pixel
// of the ground-truth section mask.
std::vector<TrainingPair> sample_training_pairs(const CrossSection& cs, const GridSdf& gt,
                                                const SamplingPolicy& policy = {});

double mse_supervision(const std::vector<double>& predicted, const std::vector<double>& target);

}  // namespace vr::lumen
