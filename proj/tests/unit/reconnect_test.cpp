#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "common/error.hpp"
#include "helpers.hpp"
#include "phantom/phantom.hpp"
#include "reconnect/reconnect.hpp"
#include "volgrid/ops.hpp"

using namespace vr;
using recon::CandidatePair;
using recon::ReconnectionType;

namespace {

skel::CenterlineBranch line_branch(int id, VoxelCoord from, VoxelCoord step, int n, int component, bool tree) {
    skel::CenterlineBranch b;
    b.id = id;
    b.component_id = component;
    b.is_connected_tree = tree;
    for (int s = 0; s < n; ++s) b.points.push_back({from.i + s * step.i, from.j + s * step.j, from.k + s * step.k});
    skel::update_tangents(b);
    return b;
}

// Bright x-aligned tube on a dark noisy background.
Volume tube_volume(Dims d, double cy, double cz, double radius, std::uint64_t seed, int x0 = 0, int x1 = -1) {
    if (x1 < 0) x1 = d.nx - 1;
    Volume v(d, {1, 1, 1}, VolumeKind::Intensity);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 10.0);
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                const bool in = i >= x0 && i <= x1 && std::hypot(j - cy, k - cz) <= radius;
                v(i, j, k) = static_cast<float>((in ? 300.0 : 0.0) + noise(rng));
            }
    return v;
}

// A disconnected branch ending (head) at `e` heading +x and a candidate whose
// head p_m lies `gap` voxels further along x.
CandidatePair collinear_pair(VoxelCoord e, int gap, int len = 8) {
    CandidatePair p;
    p.disconnected = line_branch(1, e, {-1, 0, 0}, len, 3, false);
    p.candidate = line_branch(0, {e.i + gap, e.j, e.k}, {1, 0, 0}, len, 1, true);
    p.rtype = ReconnectionType::EndReconnection;
    p.target = p.candidate.head();
    p.nearest_distance = gap;
    return p;
}

class ConstantOracle : public recon::ProbabilityOracle {
public:
    explicit ConstantOracle(double v) : v_(v) {}
    double query(const Volume&, const VoxelCoord&) const override { return v_; }

private:
    double v_;
};

// Independent adaptive max pool with real-valued bin edges.
double pooled_cell(const Volume& v, const VoxelCoord& a, int big, int small, int oi, int oj, int ok) {
    const int h = big / 2;
    auto lo = [&](int o) { return int(std::floor(double(o) * big / small)); };
    auto hi = [&](int o) { return int(std::ceil(double(o + 1) * big / small)); };
    double m = -1e300;
    for (int k = lo(ok); k < hi(ok); ++k)
        for (int j = lo(oj); j < hi(oj); ++j)
            for (int i = lo(oi); i < hi(oi); ++i) m = std::max(m, double(v.clamped(a.i + i - h, a.j + j - h, a.k + k - h)));
    return m;
}

double auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    double wins = 0.0;
    for (double p : pos)
        for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    return wins / (double(pos.size()) * double(neg.size()));
}

}  // namespace

TEST_CASE("neighbor sets match enumeration and clip at the border") {
    const Dims d{20, 20, 20};
    const VoxelCoord a{10, 10, 10};
    const auto first = recon::neighbor_set(a, recon::NeighborLevel::First, d);
    CHECK(first.size() == 26);
    std::set<VoxelCoord> expect;
    for (int k = -2; k <= 2; ++k)
        for (int j = -2; j <= 2; ++j)
            for (int i = -2; i <= 2; ++i) {
                const int cheb = std::max({std::abs(i), std::abs(j), std::abs(k)});
                if (cheb == 2 && std::sqrt(double(i * i + j * j + k * k)) <= 3.0) expect.insert({a.i + i, a.j + j, a.k + k});
            }
    const auto second = recon::neighbor_set(a, recon::NeighborLevel::Second, d);
    CHECK(std::set<VoxelCoord>(second.begin(), second.end()) == expect);
    CHECK(second.size() == expect.size());
    CHECK(recon::neighbor_set({0, 0, 0}, recon::NeighborLevel::First, d).size() == 7);
    for (const auto& c : recon::neighbor_set({0, 1, 19}, recon::NeighborLevel::Second, d)) {
        CHECK(c.i >= 0);
        CHECK(c.k < 20);
    }
    CHECK_THROWS_AS(recon::neighbor_set(a, recon::NeighborLevel::Second, d, 4), Error);
}

TEST_CASE("distance term") {
    CandidatePair p = collinear_pair({0, 0, 0}, 5);
    p.target = {3, 4, 0};
    CHECK(recon::d_term({0, 0, 0}, p) == doctest::Approx(-5.0));
    p.rtype = ReconnectionType::BranchOccurrence;
    CHECK(recon::d_term(p.candidate.points[3], p) == 0.0);

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> u(0, 30);
    for (int t = 0; t < 50; ++t) {
        p.candidate.points.clear();
        for (int n = 0; n < 12; ++n) p.candidate.points.push_back({u(rng), u(rng), u(rng)});
        const VoxelCoord a{u(rng), u(rng), u(rng)};
        double best = 1e300;
        for (const auto& q : p.candidate.points)
            best = std::min(best, std::sqrt(double((a.i - q.i) * (a.i - q.i) + (a.j - q.j) * (a.j - q.j) +
                                                   (a.k - q.k) * (a.k - q.k))));
        CHECK(recon::d_term(a, p) == doctest::Approx(-best));
    }
}

TEST_CASE("cosine and DPC terms") {
    const Vec3 x(1, 0, 0), y(0, 1, 0), z(0, 0, 1);
    CHECK(recon::c_term(x, x, y) == doctest::Approx(1.0));
    CHECK(recon::c_term(z, x, y) == doctest::Approx(0.0));
    CHECK(recon::c_term(-x, x, x) == doctest::Approx(-2.0));
    CHECK(recon::c_term(x, Vec3::Zero(), x) == doctest::Approx(1.0));

    recon::History h;
    h.o_minus1 = x;
    h.o_minus2 = y;
    CHECK(recon::dpc_score(-5, 1, 1, h, 5) == doctest::Approx(1.0));
    h.o_minus2 = Vec3(0.9, std::sqrt(1 - 0.81), 0);
    CHECK(recon::dpc_score(-5, 1, 1, h, 5) == doctest::Approx(0.0));
    h.o_minus2 = y;
    CHECK(recon::dpc_score(-5, 1, 1, h, 0) == doctest::Approx(-4.0));
}

TEST_CASE("probability normalisation") {
    const auto n = recon::p_normalize({0.2, 0.6, 1.0});
    CHECK(n[0] == doctest::Approx(0.0));
    CHECK(n[1] == doctest::Approx(0.5));
    CHECK(n[2] == doctest::Approx(1.0));
    for (double v : recon::p_normalize({0.3, 0.3, 0.3})) CHECK(v == 0.5);
    CHECK(recon::p_normalize({}).empty());

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> p(2 + t % 30);
        for (auto& v : p) v = u(rng);
        const auto a = recon::p_normalize(p);
        CHECK(*std::min_element(a.begin(), a.end()) == doctest::Approx(0.0));
        CHECK(*std::max_element(a.begin(), a.end()) == doctest::Approx(1.0));
        // Shifting every P leaves the normalised values, hence the DPC argmax, unchanged.
        std::vector<double> shifted = p;
        const double c = u(rng) - 0.5;
        for (auto& v : shifted) v += c;
        const auto b = recon::p_normalize(shifted);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-9));
        const auto order = [](const std::vector<double>& v) {
            return std::max_element(v.begin(), v.end()) - v.begin();
        };
        CHECK(order(a) == order(b));
    }
}

TEST_CASE("patch features") {
    const Volume flat({12, 12, 12}, {1, 1, 1}, VolumeKind::Intensity, 7.0f);
    const auto f = recon::p_features(flat, {0, 5, 11});
    CHECK(f.size() == 686);
    for (double v : f) CHECK(v == 7.0);

    std::mt19937_64 rng(5);
    Volume v({14, 13, 12}, {1, 1, 1}, VolumeKind::Intensity);
    std::uniform_real_distribution<float> u(-1, 1);
    for (auto& x : v.data()) x = u(rng);
    const auto same = recon::p_features(v, {6, 6, 6}, 7, 7);
    CHECK(std::equal(same.begin(), same.begin() + 343, same.begin() + 343));

    for (const VoxelCoord a : {VoxelCoord{6, 6, 6}, VoxelCoord{0, 12, 3}, VoxelCoord{13, 0, 11}}) {
        const auto g = recon::p_features(v, a, 15, 7);
        for (int k = 0; k < 7; ++k)
            for (int j = 0; j < 7; ++j)
                for (int i = 0; i < 7; ++i) {
                    CHECK(g[static_cast<std::size_t>((k * 7 + j) * 7 + i)] == doctest::Approx(pooled_cell(v, a, 15, 7, i, j, k)));
                    CHECK(g[static_cast<std::size_t>(343 + (k * 7 + j) * 7 + i)] ==
                          v.clamped(a.i + i - 3, a.j + j - 3, a.k + k - 3));
                }
    }

    const Volume t = tube_volume({24, 24, 24}, 12, 12, 2.5, 9);
    const auto in = recon::p_features(t, {12, 12, 12});
    const auto out = recon::p_features(t, {12, 2, 2});
    const auto mean = [](const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / x.size(); };
    CHECK(mean(in) > mean(out));
    CHECK_THROWS_AS(recon::p_features(t, {1, 1, 1}, 14, 7), Error);
}

TEST_CASE("linear oracle separates centerline from the wall shell on a held-out phantom") {
    const auto specs = phantom::standard_suite_specs();
    const auto train = phantom::generate(specs[0]);
    const auto test = phantom::generate(specs[5]);

    recon::LinearPatchOracle untrained;
    CHECK_FALSE(untrained.trained());
    try {
        untrained.query(train.volume, {1, 1, 1});
        FAIL("expected UntrainedOracle");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UntrainedOracle);
    }

    const auto skel = skel::skeletonize_hard(train.gt_mask);
    recon::LinearPatchOracle oracle;
    oracle.fit(train.volume, train.gt_mask, skel.mask);
    REQUIRE(oracle.trained());

    const auto test_skel = skel::skeletonize_hard(test.gt_mask);
    const auto outside = euclidean_dt(test.gt_mask, true);
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < test.volume.size(); ++i) {
        const auto c = test.volume.coord(i);
        if (test_skel.mask.data()[i] > 0.5f)
            pos.push_back(oracle.query(test.volume, c));
        else if (outside.data()[i] > 0.0f && outside.data()[i] <= 7.0f && i % 5 == 0)
            neg.push_back(oracle.query(test.volume, c));
    }
    REQUIRE(pos.size() > 50);
    CHECK(auc(pos, neg) > 0.8);
    for (double p : pos) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }

    const Volume flat({20, 20, 20}, {1, 1, 1}, VolumeKind::Intensity, 5.0f);
    const double p0 = oracle.query(flat, {3, 3, 3});
    CHECK(oracle.query(flat, {10, 12, 15}) == p0);
    CHECK(oracle.query(train.volume, {30, 16, 14}) == oracle.query(train.volume, {30, 16, 14}));
}

TEST_CASE("percentile oracle") {
    const Volume t = tube_volume({30, 20, 20}, 10, 10, 2.5, 4);
    recon::PercentileOracle o(t);
    CHECK(o.query(t, {15, 10, 10}) > 0.8);
    CHECK(o.query(t, {15, 2, 2}) < 0.1);
    const Volume flat({5, 5, 5}, {1, 1, 1}, VolumeKind::Intensity, 1.0f);
    recon::PercentileOracle f(flat);
    CHECK(f.query(flat, {2, 2, 2}) == 0.5);
    CHECK_THROWS_AS(recon::PercentileOracle(t, 90, 10), Error);
}

TEST_CASE("candidate selection gates") {
    const Dims d{140, 30, 30};
    auto build = [&](int gap) {
        auto m = testing::mask(d.nx, d.ny, d.nz);
        testing::draw_x_tube(m, 2, 40, 15, 15, 2.0);
        testing::draw_x_tube(m, 41 + gap, 41 + gap + 20, 15, 15, 2.0);
        // Second tree far away in z keeps the fragment the third component.
        testing::draw_x_tube(m, 2, 130, 15, 4, 2.0);
        return m;
    };
    auto run = [&](const Volume& m) {
        const auto sk = skel::skeletonize_hard(m);
        const auto comps = connected_components(m);
        const auto br = skel::extract_branches(sk, comps, 2);
        return recon::select_candidates(br, sk);
    };
    const auto near = run(build(10));
    REQUIRE_FALSE(near.empty());
    CHECK(near.front().rtype == ReconnectionType::EndReconnection);
    CHECK(near.front().proximal_angle < 10.0);
    CHECK(near.front().nearest_distance >= 10.0);
    CHECK(near.front().nearest_distance < 16.0);
    CHECK(near.front().start().i > 40);  // oriented to the opening point facing the tree

    const auto far = run(build(100));
    CHECK(std::none_of(far.begin(), far.end(), [](const CandidatePair& p) {
        return p.rtype != ReconnectionType::SmallVesselMerge;
    }));

    // Two short facing fragments 5 voxels apart and away from the trees.
    auto m = testing::mask(60, 40, 40);
    testing::draw_x_tube(m, 2, 57, 5, 5, 2.0);
    testing::draw_x_tube(m, 2, 57, 34, 34, 2.0);
    testing::draw_x_tube(m, 15, 24, 20, 20, 1.0);
    testing::draw_x_tube(m, 30, 39, 20, 20, 1.0);
    const auto pairs = run(m);
    REQUIRE_FALSE(pairs.empty());
    const auto t1 = std::count_if(pairs.begin(), pairs.end(), [](const CandidatePair& p) {
        return p.rtype == ReconnectionType::SmallVesselMerge;
    });
    CHECK(t1 >= 1);
    for (const auto& p : pairs) {
        CHECK(p.nearest_distance >= 0.0);
        CHECK(p.proximal_angle >= 0.0);
        CHECK(p.proximal_angle <= 180.0);
        if (p.rtype == ReconnectionType::SmallVesselMerge) {
            CHECK(p.nearest_distance < 60.0);
            CHECK(p.proximal_angle < 120.0);
        }
    }
    std::map<int, int> per_branch;
    for (const auto& p : pairs)
        if (p.rtype == ReconnectionType::SmallVesselMerge) ++per_branch[p.disconnected_index];
    for (const auto& [b, n] : per_branch) CHECK(n <= 2);
}

TEST_CASE("type-3 gate needs an interior attach point in front of the branch") {
    CandidatePair p;
    p.rtype = ReconnectionType::BranchOccurrence;
    p.candidate = line_branch(0, {0, 10, 10}, {1, 0, 0}, 40, 1, true);
    p.disconnected = line_branch(1, {20, 16, 10}, {0, 1, 0}, 15, 3, false);
    recon::SelectionParams params;
    CHECK(recon::type3_gate(p, params));
    p.disconnected = line_branch(1, {20, 16, 10}, {0, -1, 0}, 15, 3, false);  // facing away
    CHECK_FALSE(recon::type3_gate(p, params));
    p.disconnected = line_branch(1, {1, 16, 10}, {0, 1, 0}, 15, 3, false);  // attach at the candidate end
    CHECK_FALSE(recon::type3_gate(p, params));
}

TEST_CASE("walk reaches across a straight gap inside the tube") {
    const Dims d{40, 20, 20};
    const Volume v = tube_volume(d, 10, 10, 2.5, 21);
    recon::PercentileOracle o(v);
    const recon::CachedOracle p(o, v);
    const auto pair = collinear_pair({12, 10, 10}, 8);
    const auto r = recon::walk(pair, p, {});
    CHECK(r.reached);
    CHECK(r.path.front() == pair.start());
    CHECK(chebyshev(r.path.back(), pair.target) <= 1);
    CHECK(r.path.size() >= 8);
    CHECK(r.path.size() <= 10);
    CHECK(r.traces.size() + 1 == r.path.size());
    std::set<VoxelCoord> seen(r.path.begin(), r.path.end());
    CHECK(seen.size() == r.path.size());
    for (const auto& c : recon::densify(r.path)) CHECK(std::hypot(c.j - 10.0, c.k - 10.0) <= 3.5);

    const auto ev = recon::evaluate_reconnection(r, pair, p);
    CHECK(ev.verdict == recon::Verdict::Accept);
    CHECK(ev.score > 1.5);
}

TEST_CASE("walk stops without reaching when blocked or out of steps") {
    const Dims d{40, 20, 20};
    const Volume v = tube_volume(d, 10, 10, 2.5, 22);
    recon::PercentileOracle o(v);
    const recon::CachedOracle p(o, v);
    const auto pair = collinear_pair({12, 10, 10}, 12);

    recon::WalkParams few;
    few.max_steps = 4;
    const auto r = recon::walk(pair, p, few);
    CHECK_FALSE(r.reached);
    CHECK(r.path.size() <= 5);
    CHECK(r.stop_reason == "max_steps");

    std::vector<std::uint8_t> wall(v.size(), 0);
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j) wall[v.index(17, j, k)] = 1;
    const auto b = recon::walk(pair, p, {}, wall);
    CHECK_FALSE(b.reached);
    for (const auto& c : b.path) CHECK(c.i < 17);

    const auto adj = collinear_pair({12, 10, 10}, 1);
    const auto a = recon::walk(adj, p, {});
    CHECK(a.reached);
    CHECK(a.path.size() <= 2);
}

TEST_CASE("walk never revisits and respects the step budget on random volumes") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<float> u(0, 1);
    for (int t = 0; t < 20; ++t) {
        Volume v({24, 24, 24}, {1, 1, 1}, VolumeKind::Intensity);
        for (auto& x : v.data()) x = u(rng);
        recon::PercentileOracle o(v, 0, 100);
        const recon::CachedOracle p(o, v);
        auto pair = collinear_pair({4 + t % 4, 12, 12}, 10 + t % 6);
        pair.nearest_distance = 10 + t % 6 + (t % 2 ? 15 : 0);
        recon::WalkParams params;
        params.omega = 1.0 + t % 5;
        const auto r = recon::walk(pair, p, params);
        std::set<VoxelCoord> seen(r.path.begin(), r.path.end());
        CHECK(seen.size() == r.path.size());
        CHECK(int(r.path.size()) - 1 <= int(std::ceil(4 * pair.nearest_distance)) + 20);
        if (r.reached) CHECK(chebyshev(r.path.back(), pair.target) <= 1);
        const auto again = recon::walk(pair, p, params);
        CHECK(again.path == r.path);
    }
}

TEST_CASE("evaluation rejects a stitch through background") {
    const Dims d{40, 20, 20};
    Volume v = tube_volume(d, 10, 10, 2.5, 23);
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 13; i <= 19; ++i) v(i, j, k) = 0.0f;
    recon::PercentileOracle o(v);
    const recon::CachedOracle p(o, v);
    const auto pair = collinear_pair({12, 10, 10}, 8);
    const auto r = recon::walk(pair, p, {});
    const auto ev = recon::evaluate_reconnection(r, pair, p);
    CHECK(ev.verdict == recon::Verdict::Reject);

    recon::WalkResult unreached = r;
    unreached.reached = false;
    const ConstantOracle one(1.0);
    const recon::CachedOracle p1(one, v);
    CHECK(recon::evaluate_reconnection(unreached, pair, p1).verdict == recon::Verdict::Reject);
}

TEST_CASE("ADF penalty mapping") {
    CHECK(recon::adf_penalty({1, 2, 3}) == 1.0);
    CHECK(recon::adf_penalty(std::vector<double>(20, 4.0)) == 0.0);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    std::vector<double> noise(60);
    for (auto& x : noise) x = g(rng);
    const double pv = recon::adf_penalty(noise);
    CHECK(pv >= 0.0);
    CHECK(pv < 0.05);
}

TEST_CASE("reconnection leaves connected trees and empty masks unchanged") {
    auto m = testing::mask(40, 20, 20);
    testing::draw_x_tube(m, 2, 37, 6, 10, 2.0);
    testing::draw_x_tube(m, 2, 37, 14, 10, 2.0);
    const Volume v = tube_volume({40, 20, 20}, 6, 10, 2.0, 1);
    const auto out = recon::run_reconnection(m, v, nullptr, {});
    CHECK(out.refined.values() == m.values());
    CHECK(out.stitches.empty());
    CHECK(out.report.pairs.empty());

    const auto empty = testing::mask(10, 10, 10);
    const Volume ev({10, 10, 10}, {1, 1, 1}, VolumeKind::Intensity);
    const auto e = recon::run_reconnection(empty, ev, nullptr, {});
    CHECK(e.refined.values() == empty.values());
    CHECK(e.stitches.empty());
}

TEST_CASE("three breaks are stitched and a decoy is removed") {
    phantom::PhantomSpec s;
    s.name = "three-breaks";
    s.seed = 77;
    s.dims = {96, 32, 40};
    s.spacing = {0.5, 0.5, 0.5};
    s.branches.push_back({{{6, 16, 14}, {90, 16, 14}}, {2.4}});
    s.breaks = {{0, 24, 32}, {0, 46, 54}, {0, 66, 72}};
    s.decoys.push_back({{{20, 28, 32}, {40, 29, 33}}, {2.0}});
    const auto c = phantom::generate(s);

    recon::ReconnectParams params;
    params.tree_components = 1;
    const auto out = recon::run_reconnection(c.broken_mask, c.volume, nullptr, params, &c.gt_mask);
    REQUIRE(out.report.counts);
    const auto& n = *out.report.counts;
    CHECK(out.stitches.size() == 3);
    CHECK(n.tp_s == 3);
    CHECK(n.tn_b == 1);
    CHECK(n.fp_s + n.fp_b + n.fn_b == 0);
    CHECK(out.report.removed_components == 1);

    const auto near_gt = dilate(c.gt_mask, 1);
    for (const auto& st : out.stitches) {
        for (const auto& q : st.path) CHECK(near_gt.at(q) > 0.5f);
        for (std::size_t i = 1; i < st.centerline.points.size(); ++i)
            CHECK(chebyshev(st.centerline.points[i - 1], st.centerline.points[i]) == 1);
    }
    for (std::size_t i = 0; i < c.broken_mask.size(); ++i) CHECK(out.refined.data()[i] <= c.broken_mask.data()[i]);
    for (int i = 20; i <= 40; ++i) CHECK(out.refined(i, 28, 32) == 0.0f);

    const auto again = recon::run_reconnection(c.broken_mask, c.volume, nullptr, params, &c.gt_mask);
    CHECK(recon::report_json(again.report) == recon::report_json(out.report));
    CHECK(recon::stitches_to_jsonl(again.stitches) == recon::stitches_to_jsonl(out.stitches));
    const auto j = nlohmann::json::parse(recon::report_json(out.report));
    CHECK(j["rec_acc"].get<double>() == doctest::Approx(1.0));
}
