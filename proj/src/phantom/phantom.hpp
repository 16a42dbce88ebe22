#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "common/curve.hpp"
#include "skeleton/skeleton.hpp"
#include "volgrid/volume.hpp"

namespace vr::phantom {

// Control points in voxel coordinates; one radius for the whole tube or one
// per control point (interpolated along the spline parameter).
struct TubeSpec {
    std::vector<Vec3> control;
    std::vector<double> radii;
};

// Arc-length interval [start, end] (voxels) of a branch removed from the mask.
struct BreakSpec {
    int branch = 0;
    double start = 0.0;
    double end = 0.0;
};

struct IntensitySpec {
    double vessel = 300.0;
    double background = 0.0;
    double noise_sd = 20.0;
};

struct PhantomSpec {
    std::string name;
    std::string category;
    std::uint64_t seed = 0;
    Dims dims{};
    Spacing spacing{};
    std::vector<TubeSpec> branches;
    std::vector<BreakSpec> breaks;
    std::vector<TubeSpec> decoys;
    IntensitySpec intensity;
    bool occlusion = false;  // breaks also dim the intensity
};

struct BreakRecord {
    int branch = 0;
    double start = 0.0;
    double end = 0.0;
    bool should_reconnect = true;
    bool decoy = false;
};

struct PhantomCase {
    PhantomSpec spec;
    Volume volume;       // Intensity
    Volume gt_mask;      // all branches, no decoys
    Volume broken_mask;  // gt minus breaks, plus decoys
    std::vector<skel::CenterlineBranch> gt_centerlines;
    std::vector<BreakRecord> break_records;
};

// Dense samples (0.25 voxel) along a tube axis with the interpolated radius.
struct TubeSample {
    CurveSample c;
    double radius = 0.0;
};
std::vector<TubeSample> sample_tube(const TubeSpec& tube, double step = 0.25);

// Marks voxels covered by flat-capped discs swept along the samples whose
// arc length lies in [s0, s1]; `grow` widens every disc.
void rasterize_tube(Volume& mask, const std::vector<TubeSample>& samples, double s0, double s1, double grow = 0.0);

void validate(const PhantomSpec& spec);
PhantomCase generate(const PhantomSpec& spec);

// Fixed, seeded catalog covering straight, curved, long and multiple gaps,
// branch occurrence, decoy removal and a loop-shaped tree. Every case holds
// a second intact tree next to the one carrying breaks.
std::vector<PhantomSpec> standard_suite_specs();
std::vector<PhantomCase> standard_suite();

// Single tree with one straight mid-trunk break (no second tree).
PhantomSpec single_tree_break_spec(double gap = 10.0, std::uint64_t seed = 99);

std::string spec_to_json(const PhantomSpec& spec);
PhantomSpec spec_from_json(const std::string& text);

// DIR/volume.{json,raw}, gt_mask.*, broken_mask.*, truth.json.
void save_case(const PhantomCase& c, const std::filesystem::path& dir);
PhantomCase load_case(const std::filesystem::path& dir);

}  // namespace vr::phantom
