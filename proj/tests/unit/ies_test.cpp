#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "common/error.hpp"
#include "common/parallel.hpp"
#include "helpers.hpp"
#include "ies/ies.hpp"
#include "phantom/phantom.hpp"
#include "topometrics/topometrics.hpp"
#include "volgrid/ops.hpp"

using namespace vr;
using namespace vr::ies;

namespace {

ContourSection circle(double r, int n = 64) {
    std::vector<Vec2> pts;
    for (int k = 0; k < n; ++k) pts.emplace_back(r * std::cos(2 * kPi * k / n), r * std::sin(2 * kPi * k / n));
    return ContourSection(pts);
}

TubeModel tube_along(const std::vector<Vec3>& centers, const std::function<double(std::size_t)>& radius) {
    const auto frames = lumen::rmf_frames(centers, lumen::polyline_tangents(centers));
    std::vector<ContourSection> sections;
    for (std::size_t i = 0; i < centers.size(); ++i) sections.push_back(circle(radius(i)));
    return build_tube_model(centers, frames, sections);
}

double directed_hausdorff(const Volume& from, const Volume& to) {
    const Volume d = euclidean_dt(to, true);
    double worst = 0.0;
    for (std::size_t i = 0; i < from.size(); ++i)
        if (from.data()[i] != 0.0f) worst = std::max(worst, double(d.data()[i]));
    return worst;
}

std::vector<Vec3> arc_points(double radius, int count, double step) {
    std::vector<Vec3> pts;
    for (int i = 0; i < count; ++i) {
        const double a = step * i / radius;
        pts.emplace_back(20 + radius * std::sin(a), 20 + radius * (1 - std::cos(a)), 16 + 0.1 * i);
    }
    return pts;
}

}  // namespace

TEST_CASE("blending basis is a partition of unity") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> gap(0.01, 0.2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> st{0.0};
        while (st.size() < 3 || st.back() < 1.0) st.push_back(st.back() + gap(rng));
        const PspsBasis basis(st);
        for (int g = 0; g <= 10000; ++g) {
            const double t = st.front() + (st.back() - st.front()) * g / 10000.0;
            const auto w = basis.weights(t);
            double sum = 0.0;
            for (double v : w) {
                CHECK(v >= 0.0);
                sum += v;
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
        for (std::size_t i = 0; i < st.size(); ++i) {
            const auto w = basis.weights(st[i]);
            CHECK(std::max_element(w.begin(), w.end()) - w.begin() == long(i));
        }
    }
}

TEST_CASE("two stations blend evenly at the midpoint") {
    const PspsBasis basis({0.0, 1.0});
    const auto w = basis.weights(0.5);
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(0.5));
    CHECK(basis.weights(0.0)[0] > basis.weights(0.0)[1]);
    CHECK_FALSE(basis.covers(10.0));
    CHECK_THROWS_AS(PspsBasis({0.5, 0.2}), Error);
}

TEST_CASE("bump is C2 at the support edge") {
    const double h = 1e-4;
    CHECK(PspsBasis::bump(0.0) == 1.0);
    CHECK(PspsBasis::bump(1.0) == 0.0);
    CHECK(std::abs(PspsBasis::bump(1.0 - h)) < 1e-12);
    const double d1 = (PspsBasis::bump(h) - PspsBasis::bump(0.0)) / h;
    CHECK(std::abs(d1) < 1e-3);
}

TEST_CASE("contour section signed distance") {
    const auto sq = ContourSection({{-1, -1}, {1, -1}, {1, 1}, {-1, 1}});
    CHECK(sq.value(0, 0) == doctest::Approx(1.0));
    CHECK(sq.value(3, 0) == doctest::Approx(-2.0));
    CHECK(sq.value(2, 2) == doctest::Approx(-std::sqrt(2.0)));
    CHECK(sq.value(0.5, 0) == doctest::Approx(0.5));
    CHECK_THROWS_AS(ContourSection({{0, 0}, {1, 0}}), Error);
}

TEST_CASE("implicit coordinates on a straight model") {
    std::vector<Vec3> c;
    for (int i = 0; i <= 10; ++i) c.emplace_back(2.0 * i, 5.0, 5.0);
    const auto m = tube_along(c, [](std::size_t) { return 3.0; });
    const auto on = implicit_coords(m, {7.0, 5.0, 5.0});
    REQUIRE(on);
    CHECK(on->t == doctest::Approx(0.35));
    CHECK(on->u == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(on->v == doctest::Approx(0.0).epsilon(1e-12));
    const Vec3 n = m.frames[3].normal;
    const auto off = implicit_coords(m, Vec3(6.0, 5.0, 5.0) + 2.5 * n);
    REQUIRE(off);
    CHECK(off->t == doctest::Approx(0.3));
    CHECK(off->u == doctest::Approx(2.5));
    CHECK(std::abs(off->v) < 1e-12);
    CHECK_FALSE(implicit_coords(m, {-3.0, 5.0, 5.0}));
    CHECK(implicit_coords(m, {-0.4, 5.0, 5.0}));
    CHECK_FALSE(implicit_coords(m, {23.0, 5.0, 5.0}));
}

TEST_CASE("implicit coordinates agree with a dense section-plane scan") {
    const auto c = arc_points(12.0, 30, 1.0);
    const auto m = tube_along(c, [](std::size_t) { return 2.0; });
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> jitter(-3.0, 3.0);
    std::uniform_int_distribution<std::size_t> pick(4, c.size() - 5);
    for (int trial = 0; trial < 300; ++trial) {
        const Vec3 q = c[pick(rng)] + Vec3(jitter(rng), jitter(rng), jitter(rng));
        double best = 1e300, best_t = 0.0;
        for (std::size_t i = 0; i + 1 < c.size(); ++i) {
            const Vec3 t0 = m.frames[i].tangent, t1 = m.frames[i + 1].tangent;
            auto side = [&](double l) {
                return (q - (c[i] + l * (c[i + 1] - c[i]))).dot((1 - l) * t0 + l * t1);
            };
            constexpr int kSteps = 2000;
            for (int k = 0; k < kSteps; ++k) {
                const double a = double(k) / kSteps, b = double(k + 1) / kSteps;
                if ((side(a) > 0) == (side(b) > 0)) continue;
                const double l = a + (b - a) * side(a) / (side(a) - side(b));
                const double d = (q - (c[i] + l * (c[i + 1] - c[i]))).norm();
                if (d < best) {
                    best = d;
                    best_t = (m.arc[i] + l * (m.arc[i + 1] - m.arc[i])) / m.length();
                }
            }
        }
        const auto ic = implicit_coords(m, q);
        REQUIRE(ic);
        CHECK(std::abs(ic->t - best_t) * m.length() < 0.01);
        CHECK(std::hypot(ic->u, ic->v) == doctest::Approx(best).epsilon(1e-3));
    }
}

TEST_CASE("implicit value on circular sections") {
    std::vector<Vec3> c;
    for (int i = 0; i <= 10; ++i) c.emplace_back(i, 0, 0);
    const auto m = tube_along(c, [](std::size_t) { return 4.0; });
    CHECK(implicit_value(m, {5.0, 0.0, 0.0}) == doctest::Approx(4.0).epsilon(0.01));
    CHECK(implicit_value(m, {100.0, 0.0, 0.0}) == kOutsideValue);
    for (double x = 0.5; x < 9.5; x += 0.37)
        CHECK(implicit_value(m, {x, 1.0, 0.5}) == doctest::Approx(implicit_value(m, {5.0, 1.0, 0.5})).epsilon(1e-9));
}

TEST_CASE("implicit value is Lipschitz") {
    const auto c = arc_points(15.0, 25, 1.0);
    const auto m = tube_along(c, [](std::size_t i) { return 2.0 + 0.05 * double(i); });
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> jitter(-2.5, 2.5), tiny(-0.05, 0.05);
    std::uniform_int_distribution<std::size_t> pick(2, c.size() - 3);
    for (int trial = 0; trial < 2000; ++trial) {
        const Vec3 q = c[pick(rng)] + Vec3(jitter(rng), jitter(rng), jitter(rng));
        const Vec3 d(tiny(rng), tiny(rng), tiny(rng));
        const double a = implicit_value(m, q), b = implicit_value(m, q + d);
        if (a == kOutsideValue || b == kOutsideValue) continue;
        CHECK(std::abs(a - b) <= 2.0 * d.norm() + 1e-9);
    }
}

TEST_CASE("voxelized straight tube matches the analytic cylinder") {
    std::vector<Vec3> c;
    for (int i = 4; i <= 36; ++i) c.emplace_back(i, 16, 16);
    const auto m = tube_along(c, [](std::size_t) { return 3.0; });
    const Volume vox = voxelize(m, {41, 32, 32}, {1, 1, 1});
    Volume ref({41, 32, 32}, {1, 1, 1}, VolumeKind::BinaryMask);
    for (int k = 0; k < 32; ++k)
        for (int j = 0; j < 32; ++j)
            for (int i = 4; i <= 36; ++i)
                if (std::hypot(j - 16.0, k - 16.0) <= 3.0) ref(i, j, k) = 1.0f;
    CHECK(topo::dice(vox, ref) >= 0.95);
    CHECK(voxelize(TubeModel{}, {8, 8, 8}, {1, 1, 1}).count_nonzero() == 0);
}

TEST_CASE("voxelized curved tube stays within a voxel of the swept discs") {
    phantom::TubeSpec spec{{{6, 8, 10}, {18, 20, 14}, {34, 22, 18}, {40, 36, 20}}, {2.5}};
    const auto samples = phantom::sample_tube(spec, 0.25);
    std::vector<Vec3> centers;
    for (std::size_t i = 0; i < samples.size(); i += 4) centers.push_back(samples[i].c.p);
    const auto m = tube_along(centers, [](std::size_t) { return 2.5; });
    const Dims dims{48, 48, 32};
    const Volume vox = voxelize(m, dims, {1, 1, 1});
    Volume ref(dims, {1, 1, 1}, VolumeKind::BinaryMask);
    phantom::rasterize_tube(ref, samples, samples[0].c.s, samples[(centers.size() - 1) * 4].c.s);
    CHECK(directed_hausdorff(vox, ref) <= 1.0);
    CHECK(directed_hausdorff(ref, vox) <= 1.0);
}

TEST_CASE("contour pipeline round trip reproduces the tube") {
    phantom::PhantomSpec s;
    s.name = "rt";
    s.seed = 8;
    s.dims = {48, 32, 32};
    s.spacing = {0.5, 0.5, 0.5};
    s.branches.push_back({{{2, 16, 16}, {24, 16, 16}, {46, 16, 16}}, {3.5}});
    const auto c = phantom::generate(s);
    std::vector<VoxelCoord> line;
    for (int i = 8; i <= 40; ++i) line.push_back({i, 16, 16});
    lumen::ContourParams cp;
    cp.n_policy.fixed = 20;
    const auto stations = lumen::contour_pipeline(line, c.volume, lumen::ThresholdSdfOracle(), cp);
    const auto m = build_tube_model(stations);
    const Volume vox = voxelize(m, s.dims, s.spacing);
    Volume ref = Volume::like(c.gt_mask, VolumeKind::BinaryMask);
    for (int k = 0; k < 32; ++k)
        for (int j = 0; j < 32; ++j)
            for (int i = 8; i <= 40; ++i) ref(i, j, k) = c.gt_mask(i, j, k);
    CHECK(topo::dice(vox, ref) >= 0.95);
}

TEST_CASE("voxelization does not depend on the thread count") {
    const auto c = arc_points(10.0, 20, 1.0);
    const auto m = tube_along(c, [](std::size_t) { return 2.0; });
    set_thread_count(1);
    const Volume a = voxelize(m, {40, 40, 24}, {1, 1, 1});
    set_thread_count(8);
    const Volume b = voxelize(m, {40, 40, 24}, {1, 1, 1});
    set_thread_count(0);
    CHECK(a.values() == b.values());
    CHECK(a.count_nonzero() > 0);
}

TEST_CASE("merge is a voxelwise union") {
    auto a = testing::mask(6, 6, 6), b = testing::mask(6, 6, 6);
    a(1, 1, 1) = 1;
    a(2, 2, 2) = 1;
    b(4, 4, 4) = 1;
    CHECK(merge(a, b).count_nonzero() == 3);
    CHECK(merge(a, a).values() == a.values());
    auto big = b;
    big(1, 1, 1) = big(2, 2, 2) = 1;
    CHECK(merge(a, big).values() == big.values());
    CHECK_THROWS_AS(merge(a, testing::mask(5, 6, 6)), Error);
}

TEST_CASE("marching cubes on a sphere") {
    const Dims d{24, 24, 24};
    const Spacing sp{0.5, 0.5, 0.5};
    const Vec3 center(6.0, 6.0, 6.0);
    const double r = 4.0;
    std::vector<double> field(d.count());
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i)
                field[(std::size_t(k) * d.ny + j) * d.nx + i] = r - (Vec3(i * 0.5, j * 0.5, k * 0.5) - center).norm();
    const auto tris = marching_cubes(field, d, sp);
    REQUIRE(!tris.empty());
    double area = 0.0;
    for (const auto& t : tris) {
        for (const auto& v : t) CHECK(std::abs((v - center).norm() - r) < 0.1);
        area += 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).norm();
    }
    CHECK(std::abs(area - 4 * kPi * r * r) < 0.05 * 4 * kPi * r * r);
    const auto path = testing::temp_dir("ies") / "sphere.stl";
    write_stl(path, tris);
    CHECK(std::filesystem::file_size(path) == 84 + 50 * tris.size());
}

TEST_CASE("surface mesh of a tube model") {
    std::vector<Vec3> c;
    for (int i = 4; i <= 20; ++i) c.emplace_back(i, 12, 12);
    const auto m = tube_along(c, [](std::size_t) { return 3.0; });
    const auto tris = surface_mesh(m, {26, 24, 24}, {1, 1, 1});
    CHECK(!tris.empty());
    CHECK(surface_mesh(TubeModel{}, {8, 8, 8}, {1, 1, 1}).empty());
}
