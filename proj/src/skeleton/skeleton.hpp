#pragma once

#include <string>
#include <vector>

#include "volgrid/volume.hpp"

namespace vr::skel {

struct Skeleton {
    Volume mask;  // BinaryMask for hard skeletons, Probability for soft ones
    std::string source;
    bool soft = false;
};

struct CenterlineBranch {
    int id = 0;
    std::vector<VoxelCoord> points;
    // Unit directions pointing out of the branch at each end, taken from the
    // three outermost points (endpoint difference below three points).
    Vec3 head_tangent = Vec3::Zero();
    Vec3 tail_tangent = Vec3::Zero();
    int component_id = 0;
    bool is_connected_tree = false;

    std::size_t length() const { return points.size(); }
    const VoxelCoord& head() const { return points.front(); }
    const VoxelCoord& tail() const { return points.back(); }
};

// Recomputes head/tail tangents from the current point list.
void update_tangents(CenterlineBranch& branch);

Skeleton soft_skeletonize(const Volume& prob, int iterations = 10);

// Topology-preserving directional thinning: border voxels are removed in six
// sub-iterations while they are simple (26/6 topology) and not curve ends.
// End-to-junction spurs of at most spur_length voxels are then pruned.
Skeleton skeletonize_hard(const Volume& mask, const std::string& source = {}, int spur_length = 3);

// Splits the skeleton graph at voxels with more than two 26-neighbours.
// Branches of the `tree_components` largest components of `components` are
// flagged as the connected tree. Junction voxels join the longest adjacent
// branch.
std::vector<CenterlineBranch> extract_branches(const Skeleton& skel, const LabeledComponents& components,
                                               int tree_components = 2);

// Endpoints of `branch` whose patch^3 neighbourhood holds no skeleton voxel
// other than the branch's own.
std::vector<VoxelCoord> detect_opening_points(const CenterlineBranch& branch, const Skeleton& skel, int patch = 11);

}  // namespace vr::skel

namespace vr::skel {

// One JSON object per line: {"id","component","connected","points"}.
std::string branches_to_jsonl(const std::vector<CenterlineBranch>& branches);

}  // namespace vr::skel
