#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "reconnect/oracle.hpp"
#include "skeleton/skeleton.hpp"
#include "topometrics/topometrics.hpp"
#include "volgrid/volume.hpp"

namespace vr::recon {

enum class ReconnectionType { SmallVesselMerge = 1, EndReconnection = 2, BranchOccurrence = 3 };
enum class NeighborLevel { First = 1, Second = 2 };

struct CandidatePair {
    // CL_j, oriented so points[0] is the opening point the walk starts from.
    skel::CenterlineBranch disconnected;
    // Types 1-2: oriented so points[0] is the target end p_m.
    skel::CenterlineBranch candidate;
    ReconnectionType rtype = ReconnectionType::EndReconnection;
    double nearest_distance = 0.0;
    double proximal_angle = 0.0;
    std::array<double, 2> positional_cosines{0.0, 0.0};
    int disconnected_index = -1;  // indices into the branch list
    int candidate_index = -1;

    const VoxelCoord& start() const { return disconnected.points.front(); }
    // p_m for types 1-2; nearest candidate point to the start for type 3.
    VoxelCoord target;
};

struct SelectionParams {
    double type1_max_distance = 60.0;
    double type2_max_distance = 80.0;
    double max_proximal_angle = 120.0;
    double positional_cos_cap = 1.6;
    int type3_min_length = 10;
    double type3_short_distance = 20.0;
    int type3_long_length = 50;
    double type3_long_distance = 80.0;
    double type3_max_positional_angle = 120.0;
    int type3_end_margin = 3;
    int max_pairs_per_branch = 2;
    int opening_patch = 11;
};

// A branch end eligible for reconnection, with its outward tangent.
struct OpeningPoint {
    int branch = -1;
    bool at_head = true;
};

std::vector<OpeningPoint> opening_points(const std::vector<skel::CenterlineBranch>& branches,
                                         const skel::Skeleton& skel, int patch);

// Candidate pairs of one type for the disconnected branches listed in
// `sources`. Per source branch at most max_pairs_per_branch pairs are kept,
// nearest first.
std::vector<CandidatePair> select_candidates_of_type(const std::vector<skel::CenterlineBranch>& branches,
                                                     const std::vector<OpeningPoint>& openings,
                                                     const std::vector<int>& sources, ReconnectionType type,
                                                     const SelectionParams& params);

// All three passes over every disconnected branch, without merging.
std::vector<CandidatePair> select_candidates(const std::vector<skel::CenterlineBranch>& branches,
                                             const skel::Skeleton& skel, const SelectionParams& params = {});

// Type-3 geometric gate: positional angle below the bound and an interior
// attach point. Exposed for testing.
bool type3_gate(const CandidatePair& pair, const SelectionParams& params);

struct WalkParams {
    double omega = 5.0;
    NeighborLevel neighbor_level = NeighborLevel::Second;
    double second_level_switch = 20.0;  // nearest_distance above this uses the second level
    double near_target = 3.0;           // within this distance the first level is used again
    int max_steps = 0;                  // 0: 4 * nearest_distance + 20
    int side = 5;
};

std::vector<VoxelCoord> neighbor_set(const VoxelCoord& a, NeighborLevel level, const Dims& dims, int side = 5);

double d_term(const VoxelCoord& a, const CandidatePair& pair);
double c_term(const Vec3& o_k, const Vec3& o_minus1, const Vec3& o_minus2);

struct History {
    Vec3 o_minus1 = Vec3::Zero();
    Vec3 o_minus2 = Vec3::Zero();
};

// D + omega * P_N (+ C when the last two moves deviate by more than 60 deg).
double dpc_score(double d, double p_n, double c, const History& history, double omega);

struct StepTrace {
    VoxelCoord point;
    double d = 0.0;
    double p = 0.0;
    double p_n = 0.0;
    double c = 0.0;
    bool c_used = false;
    double dpc = 0.0;
};

struct WalkResult {
    std::vector<VoxelCoord> path;  // starts at the opening point
    std::vector<StepTrace> traces;
    bool reached = false;
    ReconnectionType rtype = ReconnectionType::EndReconnection;
    std::string stop_reason;
};

// Caches oracle answers for one volume.
class CachedOracle {
public:
    CachedOracle(const ProbabilityOracle& oracle, const Volume& vol) : oracle_(oracle), vol_(vol) {}
    double operator()(const VoxelCoord& a) const;
    const Volume& volume() const { return vol_; }

private:
    const ProbabilityOracle& oracle_;
    const Volume& vol_;
    mutable std::vector<float> cache_;
};

// `blocked` marks voxels of earlier accepted stitches (may be empty).
WalkResult walk(const CandidatePair& pair, const CachedOracle& p, const WalkParams& params,
                const std::vector<std::uint8_t>& blocked = {});

// Fills 26-gaps between consecutive path points along straight segments.
std::vector<VoxelCoord> densify(const std::vector<VoxelCoord>& path);

enum class Verdict { Accept, Reject };

struct Evaluation {
    Verdict verdict = Verdict::Reject;
    double score = 0.0;
    double p_penalty = 0.0;
    double gray_penalty = 0.0;
    double threshold = 1.0;
};

struct EvaluationParams {
    double threshold = 1.0;
    int extension = 5;
    int adf_max_lags = 0;  // negative: the ADF default lag bound
};

Evaluation evaluate_reconnection(const WalkResult& result, const CandidatePair& pair, const CachedOracle& p,
                                 const EvaluationParams& params = {});

// The `count` points of the candidate the stitch ends on, starting at the
// attach point; and the `count` disconnected points ending at the opening
// point.
std::vector<VoxelCoord> candidate_segment(const CandidatePair& pair, const VoxelCoord& end, int count);
std::vector<VoxelCoord> disconnected_segment(const CandidatePair& pair, int count);

// ADF p-value used as a penalty: TooShort -> 1, ConstantSeries -> 0.
double adf_penalty(const std::vector<double>& series, int max_lags = -1);

struct ReconnectParams {
    SelectionParams selection;
    WalkParams walk;
    EvaluationParams evaluation;
    LinearOracleParams oracle;
    std::string oracle_kind = "linear";  // or "percentile"
    int tree_components = 2;
    int spur_length = 3;
    bool pass1 = true;
    bool pass2 = true;
    bool pass3 = true;
};

struct PairReport {
    ReconnectionType rtype;
    int disconnected = -1;
    int candidate = -1;
    double nearest_distance = 0.0;
    double proximal_angle = 0.0;
    bool attempted = false;  // false when the group was already resolved
    bool reached = false;
    int path_length = 0;
    Evaluation evaluation;
};

struct Stitch {
    ReconnectionType rtype;
    int disconnected = -1;
    int candidate = -1;
    std::vector<VoxelCoord> path;        // densified walk, start to end
    skel::CenterlineBranch centerline;   // CL_j end + path + candidate end
};

struct ReconnectionReport {
    std::vector<PairReport> pairs;
    int disconnected_components = 0;
    int removed_components = 0;
    std::size_t removed_voxels = 0;
    std::optional<topo::ReconnectionCounts> counts;
};

struct ReconnectionOutput {
    Volume refined;
    std::vector<Stitch> stitches;
    std::vector<skel::CenterlineBranch> branches;
    ReconnectionReport report;
};

// `oracle` may be null, in which case one is built per params.oracle_kind
// (the linear one is fitted on the tree components of `mask`).
ReconnectionOutput run_reconnection(const Volume& mask, const Volume& vol, const ProbabilityOracle* oracle,
                                    const ReconnectParams& params, const Volume* gt_mask = nullptr);

std::string report_json(const ReconnectionReport& report);
std::string stitches_to_jsonl(const std::vector<Stitch>& stitches);

const char* rtype_name(ReconnectionType t);

}  // namespace vr::recon
