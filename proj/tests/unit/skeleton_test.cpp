#include <doctest.h>

#include <set>

#include "common/error.hpp"
#include "helpers.hpp"
#include "skeleton/skeleton.hpp"
#include "skeleton/soft_skeleton.hpp"
#include "volgrid/ops.hpp"

using namespace vr;

namespace {

Volume as_prob(const Volume& m) { return m.with_kind(VolumeKind::Probability); }

bool has_2x2x2_block(const Volume& s) {
    const auto& d = s.dims();
    for (int k = 0; k + 1 < d.nz; ++k)
        for (int j = 0; j + 1 < d.ny; ++j)
            for (int i = 0; i + 1 < d.nx; ++i) {
                bool all = true;
                for (int c = 0; c < 8 && all; ++c) all = s(i + (c & 1), j + ((c >> 1) & 1), k + (c >> 2)) != 0.0f;
                if (all) return true;
            }
    return false;
}

skel::Skeleton hard(const Volume& m) { return skel::skeletonize_hard(m, "test"); }

}  // namespace

TEST_CASE("soft skeleton keeps thin lines and zeros") {
    auto m = testing::mask(9, 7, 7);
    for (int i = 1; i < 8; ++i) m(i, 3, 3) = 1;
    for (int iters : {1, 3, 10}) {
        const auto s = skel::soft_skeletonize(as_prob(m), iters);
        CHECK(s.mask.values() == m.values());
        // Idempotent on its own output.
        CHECK(skel::soft_skeletonize(s.mask, iters).mask.values() == s.mask.values());
    }
    const auto z = skel::soft_skeletonize(as_prob(testing::mask(4, 4, 4)), 5);
    CHECK(z.mask.count_nonzero() == 0);
}

TEST_CASE("soft skeleton thins a solid cube") {
    auto m = testing::mask(9, 9, 9);
    for (int k = 2; k < 7; ++k)
        for (int j = 2; j < 7; ++j)
            for (int i = 2; i < 7; ++i) m(i, j, k) = 1;
    for (int iters : {2, 5}) {
        const auto s = skel::soft_skeletonize(as_prob(m), iters);
        CHECK(s.mask.count_nonzero() < m.count_nonzero());
        CHECK(s.mask.min_value() >= 0.0f);
        CHECK(s.mask.max_value() <= 1.0f);
    }
}

TEST_CASE("soft skeleton backward matches central differences") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    const Dims d{6, 6, 6};
    std::vector<double> x(d.count()), w(d.count());
    for (auto& v : x) v = u(rng);
    for (auto& v : w) v = u(rng) - 0.5;
    skel::SoftSkeletonTape tape;
    skel::soft_skeleton(x, d, 3, &tape);
    const auto grad = skel::soft_skeleton_backward(tape, w);
    auto objective = [&](const std::vector<double>& xx) {
        const auto s = skel::soft_skeleton(xx, d, 3);
        double acc = 0;
        for (std::size_t i = 0; i < s.size(); ++i) acc += w[i] * s[i];
        return acc;
    };
    const double eps = 1e-6;
    for (std::size_t v = 0; v < x.size(); v += 7) {
        auto xp = x, xm = x;
        xp[v] += eps;
        xm[v] -= eps;
        const double fd = (objective(xp) - objective(xm)) / (2 * eps);
        CHECK(grad[v] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("hard skeleton of a single voxel is that voxel") {
    auto m = testing::mask(3, 3, 3);
    m(1, 1, 1) = 1;
    CHECK(hard(m).mask.values() == m.values());
}

TEST_CASE("hard skeleton of a straight tube follows its axis") {
    auto m = testing::mask(24, 11, 11);
    testing::draw_x_tube(m, 2, 21, 5, 5, 2.0);
    const auto s = hard(m);
    CHECK(s.mask.count_nonzero() >= 12);
    CHECK_FALSE(has_2x2x2_block(s.mask));
    for (std::size_t idx = 0; idx < s.mask.size(); ++idx) {
        if (s.mask.data()[idx] == 0.0f) continue;
        const auto c = s.mask.coord(idx);
        CHECK(std::hypot(c.j - 5.0, c.k - 5.0) <= 1.0);
        CHECK(m.at(c) == 1.0f);
    }
    CHECK(connected_components(s.mask).count() == 1);
}

TEST_CASE("hard skeleton of a torus keeps one loop") {
    const auto m = testing::torus(25, 8.0, 2.5);
    REQUIRE(testing::euler_characteristic(m) == 0);
    const auto s = hard(m);
    CHECK(testing::euler_characteristic(s.mask) == 0);
    CHECK(connected_components(s.mask).count() == 1);
    CHECK_FALSE(has_2x2x2_block(s.mask));
    const auto branches = skel::extract_branches(s, connected_components(s.mask));
    REQUIRE(branches.size() == 1);
    CHECK(skel::detect_opening_points(branches[0], s).empty());
}

TEST_CASE("hard skeleton preserves component count and topology on random blobs") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        auto noise = testing::random_mask(rng, 12, 12, 12, 0.45);
        // Smooth the noise into blobs so thinning has real work to do.
        Volume blobs = max_pool3(min_pool3(noise, 3), 3);
        const auto s = hard(blobs);
        CHECK(connected_components(s.mask).count() == connected_components(blobs).count());
        CHECK(testing::euler_characteristic(s.mask) == testing::euler_characteristic(blobs));
        for (std::size_t i = 0; i < s.mask.size(); ++i)
            if (s.mask.data()[i] != 0.0f) REQUIRE(blobs.data()[i] != 0.0f);
    }
}

TEST_CASE("Y-shaped skeleton splits into three branches") {
    auto m = testing::mask(15, 15, 3);
    for (int j = 1; j <= 7; ++j) m(7, j, 1) = 1;  // stem
    for (int t = 1; t <= 5; ++t) {
        m(7 - t, 7 + t, 1) = 1;
        m(7 + t, 7 + t, 1) = 1;
    }
    skel::Skeleton s{m, "y", false};
    const auto branches = skel::extract_branches(s, connected_components(m));
    REQUIRE(branches.size() == 3);
    // Voxel partition: every skeleton voxel appears exactly once.
    std::multiset<VoxelCoord> seen;
    for (const auto& b : branches) {
        for (std::size_t i = 0; i + 1 < b.points.size(); ++i) CHECK(chebyshev(b.points[i], b.points[i + 1]) == 1);
        seen.insert(b.points.begin(), b.points.end());
        CHECK(b.is_connected_tree);
    }
    CHECK(seen.size() == m.count_nonzero());
    CHECK(std::set<VoxelCoord>(seen.begin(), seen.end()).size() == seen.size());
}

TEST_CASE("straight path is one branch with outward tangents") {
    auto m = testing::mask(14, 3, 3);
    for (int i = 2; i < 12; ++i) m(i, 1, 1) = 1;
    skel::Skeleton s{m, "line", false};
    const auto branches = skel::extract_branches(s, connected_components(m));
    REQUIRE(branches.size() == 1);
    const auto& b = branches[0];
    CHECK(b.length() == 10);
    CHECK(b.head_tangent.norm() == doctest::Approx(1.0));
    CHECK(b.head_tangent.dot(b.head().vec() - b.tail().vec()) > 0);
    CHECK(b.tail_tangent.dot(b.tail().vec() - b.head().vec()) > 0);
    CHECK(std::abs(b.head_tangent.x()) == doctest::Approx(1.0));
    CHECK(skel::detect_opening_points(b, s).size() == 2);
}

TEST_CASE("opening points exclude ends near other skeleton parts") {
    auto m = testing::mask(30, 9, 9);
    for (int i = 0; i < 12; ++i) m(i, 4, 4) = 1;   // tree part
    for (int i = 15; i < 28; ++i) m(i, 4, 4) = 1;  // fragment, head 3 voxels from tree end
    skel::Skeleton s{m, "pair", false};
    const auto branches = skel::extract_branches(s, connected_components(m), 1);
    REQUIRE(branches.size() == 2);
    const auto& frag = branches[0].head().i >= 15 ? branches[0] : branches[1];
    const auto pts = skel::detect_opening_points(frag, s);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].i == 27);

    auto one = testing::mask(3, 3, 3);
    one(1, 1, 1) = 1;
    skel::Skeleton s1{one, "dot", false};
    const auto b1 = skel::extract_branches(s1, connected_components(one));
    REQUIRE(b1.size() == 1);
    CHECK(skel::detect_opening_points(b1[0], s1).size() == 1);
    CHECK(b1[0].head_tangent.norm() == 0.0);
    CHECK_THROWS_AS(skel::detect_opening_points(b1[0], s1, 4), Error);
}

TEST_CASE("branch dump is one JSON object per line") {
    auto m = testing::mask(6, 3, 3);
    for (int i = 0; i < 6; ++i) m(i, 1, 1) = 1;
    skel::Skeleton s{m, "line", false};
    const auto text = skel::branches_to_jsonl(skel::extract_branches(s, connected_components(m)));
    CHECK(text == "{\"component\":1,\"connected\":true,\"id\":0,\"points\":[[0,1,1],[1,1,1],[2,1,1],[3,1,1],[4,1,1],[5,1,1]]}\n");
}
