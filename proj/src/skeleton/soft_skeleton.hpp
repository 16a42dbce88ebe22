#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "volgrid/volume.hpp"

namespace vr::skel {

// Intermediates recorded by the forward pass so the soft skeleton can be
// differentiated. Min/max pooling routes gradients through the recorded
// arg-extremum index of each window.
struct SoftSkeletonTape {
    Dims dims{};
    int iterations = 0;
    std::vector<double> pre0;  // img0 - open(img0)
    std::vector<std::uint32_t> erode0_src, open0_src;
    struct Step {
        std::vector<std::uint32_t> img_src;    // img_j = erode(img_{j-1})
        std::vector<std::uint32_t> erode_src;  // erode(img_j)
        std::vector<std::uint32_t> open_src;   // dilate(erode(img_j))
        std::vector<double> dpre;              // img_j - open(img_j)
        std::vector<double> delta;             // relu(dpre)
        std::vector<double> ipre;              // delta - skel_prev * delta
        std::vector<double> skel_prev;
    };
    std::vector<Step> steps;
};

// Morphological soft skeleton: soft erosion is the minimum over the 6-cross,
// soft dilation the maximum over the 3x3x3 cube, and each iteration adds the
// residual of a soft opening. Out-of-grid cells are ignored.
std::vector<double> soft_skeleton(std::span<const double> x, const Dims& dims, int iterations,
                                  SoftSkeletonTape* tape = nullptr);

// Gradient of sum(grad_skel * soft_skeleton(x)) with respect to x.
std::vector<double> soft_skeleton_backward(const SoftSkeletonTape& tape, std::span<const double> grad_skel);

}  // namespace vr::skel
