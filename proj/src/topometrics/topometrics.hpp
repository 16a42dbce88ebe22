#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skeleton/skeleton.hpp"
#include "volgrid/volume.hpp"

namespace vr::topo {

struct NsdtParams {
    double R = 5.0;
};

// R / (d + 1) on the foreground (value >= 0.5), d = Euclidean distance to
// the nearest skeleton voxel (value >= 0.5); 0 elsewhere. Throws
// EmptySkeleton when the skeleton has no voxel.
Volume nsdt(const Volume& vol, const skel::Skeleton& skel, const NsdtParams& params = {});

// NSDT weights as doubles; an empty skeleton yields an all-zero field
// instead of an error.
std::vector<double> nsdt_weights(const Volume& vol, const Volume& skeleton, double R);

// Weighted topology precision / sensitivity over raw arrays of equal length.
//   tprec = sum(sp*np*vp*nl) / sum((sp*np)^2)
//   tsens = sum(sl*nl*np*vp) / sum((sl*nl)^2)
// A zero denominator gives 1 when the skeleton is empty and 0 otherwise.
double tprec(std::span<const double> sp, std::span<const double> vp, std::span<const double> nsdt_p,
             std::span<const double> nsdt_l);
double tsens(std::span<const double> sl, std::span<const double> vp, std::span<const double> nsdt_l,
             std::span<const double> nsdt_p);

double tprec(const Volume& sp, const Volume& vl, const Volume& vp, const Volume& nsdt_p, const Volume& nsdt_l);
double tsens(const Volume& sl, const Volume& vl, const Volume& vp, const Volume& nsdt_l, const Volume& nsdt_p);

// 1 - harmonic mean of the two; 1 when both are 0.
double dscl_from(double tprec_value, double tsens_value);

struct SoftClDiceParams {
    double R = 5.0;
    int soft_iters = 10;
};

struct SoftClDiceResult {
    double loss = 0.0;
    double tprec = 0.0;
    double tsens = 0.0;
    std::vector<double> grad;  // d loss / d vp, filled on request
};

// NSDT soft-clDice on raw arrays. Soft skeletons of vl and vp feed the
// precision/sensitivity terms; the NSDT fields come from the hard skeletons
// of vl >= 0.5 and vp >= 0.5 and are held constant for the gradient. The
// reported tprec/tsens are raw; the loss clips them to [0, 1].
SoftClDiceResult soft_cldice(std::span<const double> vl, std::span<const double> vp, const Dims& dims,
                             const SoftClDiceParams& params, bool with_grad = false);

double nsdt_soft_cldice(const Volume& vl, const Volume& vp, double R = 5.0, int soft_iters = 10);

// 1 - 2 sum(vp*vl) / (sum(vp) + sum(vl)); 0 when both are empty.
double dice_loss(std::span<const double> vl, std::span<const double> vp);

struct JointLossResult {
    double loss = 0.0;
    double dice_loss = 0.0;
    double dscl = 0.0;
    std::vector<double> grad;
};

// (1 - alpha) * dice_loss + alpha * NSDT soft-clDice.
JointLossResult joint_loss(std::span<const double> vl, std::span<const double> vp, const Dims& dims, double alpha,
                           const SoftClDiceParams& params, bool with_grad = false);
double joint_loss(const Volume& vl, const Volume& vp, double alpha = 0.5, double R = 5.0, int soft_iters = 10);

// Binary overlap; both empty gives 1.
double dice(const Volume& a, const Volume& b);

// 95th percentile (linear interpolation) of the pooled surface distances
// A->B and B->A, in millimetres. NaN when either mask is empty.
double hd95(const Volume& a, const Volume& b);

// Fraction of centerline points (both sets pooled) lying within tol voxels
// of the other set. NaN when both sets are empty.
double overlap_ov(const std::vector<skel::CenterlineBranch>& ref, const std::vector<skel::CenterlineBranch>& ext,
                  double tol);

struct ReconnectionCounts {
    long tp_b = 0;
    long tp_s = 0;
    long tn_b = 0;
    long fp_b = 0;
    long fp_s = 0;
    long fn_b = 0;

    ReconnectionCounts& operator+=(const ReconnectionCounts& o);
    bool operator==(const ReconnectionCounts&) const = default;
};

struct RecMetrics {
    double rec_acc;  // NaN when undefined
    double rec_sen;
    double rec_spe;
};

RecMetrics rec_metrics(const ReconnectionCounts& c);

struct MetricReport {
    std::optional<double> dice, hd95_mm, ov, rec_acc, rec_sen, rec_spe, l_dscl, joint_loss;
};

// {"dice","hd95_mm","ov","rec_acc","rec_sen","rec_spe","l_dscl","joint_loss"};
// absent or non-finite entries become null.
std::string metric_report_json(const MetricReport& report);

}  // namespace vr::topo
