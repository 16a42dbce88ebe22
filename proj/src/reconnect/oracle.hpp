#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "volgrid/volume.hpp"

namespace vr::recon {

// Multiscale patch features: a big^3 patch adaptively max-pooled to
// small^3, followed by the small^3 patch itself (edge-replicated reads).
std::vector<double> p_features(const Volume& vol, const VoxelCoord& a, int big = 15, int small = 7);

// Probability that a voxel lies on a vessel centerline.
class ProbabilityOracle {
public:
    virtual ~ProbabilityOracle() = default;
    virtual double query(const Volume& vol, const VoxelCoord& a) const = 0;
};

struct LinearOracleParams {
    int big = 15;
    int small = 7;
    double l2 = 1e-3;
    double learning_rate = 0.5;
    int iterations = 300;
    int shell = 7;  // negatives from at most this far outside the wall
    // In-lumen negatives keep this Chebyshev distance from the centerline.
    int centerline_margin = 1;
    std::uint64_t seed = 7;
    // Ties the weights of all feature positions at the same distance from the
    // patch centre, which makes the scorer invariant to vessel orientation.
    bool radial = true;
};

// Logistic scorer over standardized patch features.
class LinearPatchOracle : public ProbabilityOracle {
public:
    explicit LinearPatchOracle(LinearOracleParams params = {});

    // Fits on samples drawn from `mask`: every voxel of `centerline` is a
    // positive; twice as many in-lumen off-centerline voxels and twice as
    // many voxels from the outer shell are negatives.
    void fit(const Volume& vol, const Volume& mask, const Volume& centerline);

    // Fits on explicit samples.
    void fit_samples(const Volume& vol, const std::vector<VoxelCoord>& points, const std::vector<int>& labels);

    bool trained() const { return !weights_.empty(); }
    double query(const Volume& vol, const VoxelCoord& a) const override;

private:
    void fit_matrix(std::vector<std::vector<double>>& x, const std::vector<int>& labels);
    std::vector<double> reduce(const std::vector<double>& features) const;

    LinearOracleParams params_;
    std::vector<int> shell_of_;
    std::vector<double> shell_size_;
    std::vector<double> mean_, scale_, weights_;
    double bias_ = 0.0;
};

// Fallback: intensity mapped linearly between two percentiles of the volume
// (the 50th maps to 0, the 99th to 1), averaged over the 3x3x3 neighbourhood.
class PercentileOracle : public ProbabilityOracle {
public:
    explicit PercentileOracle(const Volume& vol, double low_pct = 50.0, double high_pct = 99.0);
    double query(const Volume& vol, const VoxelCoord& a) const override;

private:
    double low_ = 0.0, high_ = 1.0;
};

// Min-max normalisation; all-equal inputs map to 0.5.
std::vector<double> p_normalize(const std::vector<double>& scores);

}  // namespace vr::recon
