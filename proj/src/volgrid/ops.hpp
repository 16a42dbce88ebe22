#pragma once

#include "volgrid/volume.hpp"

namespace vr {

// Exact Euclidean distance transform in voxel units. With to_foreground the
// result is the distance to the nearest nonzero voxel (0 on the foreground);
// otherwise the distance to the nearest zero voxel. Throws EmptyMask when no
// target voxel exists.
Volume euclidean_dt(const Volume& mask, bool to_foreground);

// Same, with each axis weighted by the volume spacing (millimetres).
Volume euclidean_dt_mm(const Volume& mask, bool to_foreground);

// Squared distances (voxel units) as doubles; shared by the two above.
std::vector<double> squared_dt(const Volume& mask, bool to_foreground, const Spacing& weights);

// Deterministic labeling: labels follow descending size, ties broken by the
// smallest linear voxel index in the component.
LabeledComponents connected_components(const Volume& mask, Connectivity connectivity = Connectivity::TwentySix);

// Sliding-window extrema over a cubic kernel with edge replication. The
// output keeps the input dims. Throws EvenKernel for even or non-positive
// kernels.
Volume max_pool3(const Volume& vol, int kernel);
Volume min_pool3(const Volume& vol, int kernel);

// Binary dilation with a (2r+1)^3 cube.
Volume dilate(const Volume& mask, int radius);

}  // namespace vr
