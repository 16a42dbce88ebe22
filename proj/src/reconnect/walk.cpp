#include <algorithm>
#include <cmath>
#include <limits>

#include "common/error.hpp"
#include "reconnect/reconnect.hpp"
#include "stats/adf.hpp"

namespace vr::recon {

const char* rtype_name(ReconnectionType t) {
    switch (t) {
        case ReconnectionType::SmallVesselMerge: return "small_vessel_merge";
        case ReconnectionType::EndReconnection: return "end_reconnection";
        case ReconnectionType::BranchOccurrence: return "branch_occurrence";
    }
    return "unknown";
}

std::vector<VoxelCoord> neighbor_set(const VoxelCoord& a, NeighborLevel level, const Dims& dims, int side) {
    if (side < 3 || side % 2 == 0) fail(ErrorCode::InvalidArgument, "neighbor side must be odd and at least 3");
    const int h = level == NeighborLevel::First ? 1 : side / 2;
    const int r2 = (h + 1) * (h + 1);
    std::vector<VoxelCoord> out;
    for (int dk = -h; dk <= h; ++dk)
        for (int dj = -h; dj <= h; ++dj)
            for (int di = -h; di <= h; ++di) {
                const int cheb = std::max({std::abs(di), std::abs(dj), std::abs(dk)});
                if (cheb != h) continue;
                if (level == NeighborLevel::Second && di * di + dj * dj + dk * dk > r2) continue;
                const VoxelCoord c{a.i + di, a.j + dj, a.k + dk};
                if (c.i < 0 || c.j < 0 || c.k < 0 || c.i >= dims.nx || c.j >= dims.ny || c.k >= dims.nz) continue;
                out.push_back(c);
            }
    return out;
}

namespace {

double nearest_candidate_distance(const VoxelCoord& a, const skel::CenterlineBranch& cand) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : cand.points) best = std::min(best, distance(a, p));
    return best;
}

bool reached(const VoxelCoord& a, const CandidatePair& pair) {
    if (pair.rtype != ReconnectionType::BranchOccurrence) return chebyshev(a, pair.target) <= 1;
    return std::any_of(pair.candidate.points.begin(), pair.candidate.points.end(),
                       [&](const VoxelCoord& p) { return chebyshev(a, p) <= 1; });
}

std::size_t linear_index(const VoxelCoord& c, const Dims& d) {
    return (static_cast<std::size_t>(c.k) * d.ny + c.j) * d.nx + c.i;
}

}  // namespace

double d_term(const VoxelCoord& a, const CandidatePair& pair) {
    if (pair.rtype == ReconnectionType::BranchOccurrence) return -nearest_candidate_distance(a, pair.candidate);
    return -distance(a, pair.target);
}

double c_term(const Vec3& o_k, const Vec3& o_minus1, const Vec3& o_minus2) {
    return cosine(o_k, o_minus1) + cosine(o_k, o_minus2);
}

double dpc_score(double d, double p_n, double c, const History& history, double omega) {
    const bool use_c = cosine(history.o_minus1, history.o_minus2) <= 0.5;
    return d + omega * p_n + (use_c ? c : 0.0);
}

double CachedOracle::operator()(const VoxelCoord& a) const {
    if (cache_.empty()) cache_.assign(vol_.size(), -1.0f);
    float& slot = cache_[vol_.index(a)];
    if (slot < 0.0f) slot = static_cast<float>(std::clamp(oracle_.query(vol_, a), 0.0, 1.0));
    return slot;
}

WalkResult walk(const CandidatePair& pair, const CachedOracle& p, const WalkParams& params,
                const std::vector<std::uint8_t>& blocked) {
    if (params.omega < 0.0) fail(ErrorCode::InvalidArgument, "omega must be non-negative");
    const Volume& vol = p.volume();
    const Dims& dims = vol.dims();
    WalkResult out;
    out.rtype = pair.rtype;
    const VoxelCoord start = pair.start();
    out.path.push_back(start);
    if (reached(start, pair)) {
        out.reached = true;
        out.stop_reason = "reached";
        return out;
    }
    const int max_steps =
        params.max_steps > 0 ? params.max_steps : static_cast<int>(std::ceil(4.0 * pair.nearest_distance)) + 20;

    History hist;
    const auto& cl = pair.disconnected.points;
    if (cl.size() >= 3) {
        hist.o_minus1 = cl[0].vec() - cl[1].vec();
        hist.o_minus2 = cl[1].vec() - cl[2].vec();
    } else {
        hist.o_minus1 = pair.disconnected.head_tangent;
        hist.o_minus2 = pair.disconnected.head_tangent;
    }

    std::vector<std::size_t> visited{linear_index(start, dims)};
    auto is_visited = [&](std::size_t idx) { return std::find(visited.begin(), visited.end(), idx) != visited.end(); };

    VoxelCoord a = start;
    for (int step = 0; step < max_steps; ++step) {
        const double to_target = -d_term(a, pair);
        const bool second = params.neighbor_level == NeighborLevel::Second &&
                            pair.nearest_distance > params.second_level_switch && to_target > params.near_target;
        const auto nbrs = neighbor_set(a, second ? NeighborLevel::Second : NeighborLevel::First, dims, params.side);
        const Vec3 to_goal = pair.target.vec() - a.vec();
        const Vec3 hist_sum = hist.o_minus1 + hist.o_minus2;
        std::vector<VoxelCoord> theta;
        for (const auto& c : nbrs) {
            const std::size_t idx = linear_index(c, dims);
            if (is_visited(idx)) continue;
            if (!blocked.empty() && blocked[idx]) continue;
            const Vec3 o = c.vec() - a.vec();
            if (pair.rtype == ReconnectionType::BranchOccurrence) {
                if (cosine(o, hist.o_minus1) < 0.0 || cosine(o, hist_sum) < 0.0) continue;
            } else {
                if (cosine(o, to_goal) < 0.0 || cosine(o, hist.o_minus1) < 0.0) continue;
            }
            theta.push_back(c);
        }
        if (theta.empty()) {
            out.stop_reason = "no_viable_step";
            return out;
        }
        std::vector<double> ps(theta.size());
        for (std::size_t n = 0; n < theta.size(); ++n) ps[n] = p(theta[n]);
        const auto pn = p_normalize(ps);
        const bool use_c = cosine(hist.o_minus1, hist.o_minus2) <= 0.5;
        std::size_t best = 0;
        StepTrace best_trace;
        best_trace.dpc = -std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < theta.size(); ++n) {
            StepTrace t;
            t.point = theta[n];
            t.d = d_term(theta[n], pair);
            t.p = ps[n];
            t.p_n = pn[n];
            t.c = c_term(theta[n].vec() - a.vec(), hist.o_minus1, hist.o_minus2);
            t.c_used = use_c;
            t.dpc = dpc_score(t.d, t.p_n, t.c, hist, params.omega);
            if (t.dpc > best_trace.dpc ||
                (t.dpc == best_trace.dpc && linear_index(theta[n], dims) < linear_index(theta[best], dims))) {
                best = n;
                best_trace = t;
            }
        }
        const VoxelCoord next = theta[best];
        hist.o_minus2 = hist.o_minus1;
        hist.o_minus1 = next.vec() - a.vec();
        a = next;
        visited.push_back(linear_index(a, dims));
        out.path.push_back(a);
        out.traces.push_back(best_trace);
        if (reached(a, pair)) {
            out.reached = true;
            out.stop_reason = "reached";
            return out;
        }
    }
    out.stop_reason = "max_steps";
    return out;
}

std::vector<VoxelCoord> densify(const std::vector<VoxelCoord>& path) {
    std::vector<VoxelCoord> out;
    for (std::size_t n = 0; n < path.size(); ++n) {
        if (n == 0) {
            out.push_back(path[0]);
            continue;
        }
        const VoxelCoord a = path[n - 1], b = path[n];
        const int steps = chebyshev(a, b);
        for (int t = 1; t <= steps; ++t) {
            const double f = double(t) / steps;
            const VoxelCoord c{static_cast<int>(std::lround(a.i + f * (b.i - a.i))),
                               static_cast<int>(std::lround(a.j + f * (b.j - a.j))),
                               static_cast<int>(std::lround(a.k + f * (b.k - a.k)))};
            if (c != out.back()) out.push_back(c);
        }
    }
    return out;
}

double adf_penalty(const std::vector<double>& series, int max_lags) {
    try {
        return stats::adf_test(series, max_lags < 0 ? std::nullopt : std::optional<int>(max_lags)).p_value;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::TooShort) return 1.0;
        if (e.code() == ErrorCode::ConstantSeries) return 0.0;
        throw;
    }
}

std::vector<VoxelCoord> candidate_segment(const CandidatePair& pair, const VoxelCoord& end, int count) {
    const auto& pts = pair.candidate.points;
    std::vector<VoxelCoord> out;
    if (pts.empty() || count <= 0) return out;
    if (pair.rtype != ReconnectionType::BranchOccurrence) {
        for (std::size_t i = 0; i < pts.size() && int(i) < count; ++i) out.push_back(pts[i]);
        return out;
    }
    std::size_t m = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d = distance(pts[i], end);
        if (d < bd) {
            bd = d;
            m = i;
        }
    }
    const bool forward = pts.size() - m >= m + 1;
    for (int n = 0; n < count; ++n) {
        const long i = forward ? long(m) + n : long(m) - n;
        if (i < 0 || i >= long(pts.size())) break;
        out.push_back(pts[static_cast<std::size_t>(i)]);
    }
    return out;
}

std::vector<VoxelCoord> disconnected_segment(const CandidatePair& pair, int count) {
    const auto& pts = pair.disconnected.points;
    std::vector<VoxelCoord> out;
    for (int n = std::min<int>(count, int(pts.size())) - 1; n >= 0; --n) out.push_back(pts[static_cast<std::size_t>(n)]);
    return out;
}

Evaluation evaluate_reconnection(const WalkResult& result, const CandidatePair& pair, const CachedOracle& p,
                                 const EvaluationParams& params) {
    Evaluation ev;
    ev.threshold = params.threshold;
    if (result.path.empty()) return ev;
    const auto dense = densify(result.path);
    std::vector<VoxelCoord> stitched(dense.begin() + 1, dense.end());
    if (stitched.empty()) stitched.push_back(dense.front());

    double mp = 0.0;
    for (const auto& c : stitched) mp += p(c);
    mp /= double(stitched.size());
    double mc = 0.0;
    for (const auto& c : pair.disconnected.points) mc += p(c);
    mc /= double(pair.disconnected.points.size());
    ev.score = mp + mc;

    std::vector<VoxelCoord> seq = disconnected_segment(pair, params.extension);
    for (std::size_t i = 1; i < dense.size(); ++i) seq.push_back(dense[i]);
    for (const auto& c : candidate_segment(pair, dense.back(), params.extension))
        if (seq.empty() || c != seq.back()) seq.push_back(c);
    std::vector<double> pseq, gseq;
    for (const auto& c : seq) {
        pseq.push_back(p(c));
        gseq.push_back(p.volume().at(c));
    }
    ev.p_penalty = adf_penalty(pseq, params.adf_max_lags);
    ev.gray_penalty = adf_penalty(gseq, params.adf_max_lags);
    const bool ok = result.reached && ev.score > params.threshold + ev.p_penalty + ev.gray_penalty;
    ev.verdict = ok ? Verdict::Accept : Verdict::Reject;
    return ev;
}

}  // namespace vr::recon
