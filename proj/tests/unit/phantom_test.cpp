#include <doctest.h>

#include <set>

#include "common/error.hpp"
#include "helpers.hpp"
#include "phantom/phantom.hpp"
#include "volgrid/ops.hpp"

using namespace vr;

namespace {

phantom::PhantomSpec tube_spec(std::uint64_t seed) {
    phantom::PhantomSpec s;
    s.name = "tube";
    s.seed = seed;
    s.dims = {48, 24, 24};
    s.spacing = {0.5, 0.5, 0.5};
    s.branches.push_back({{{4, 12, 12}, {24, 14, 11}, {44, 12, 12}}, {2.2}});
    return s;
}

double axis_distance(const std::vector<phantom::TubeSample>& samples, const VoxelCoord& c) {
    double best = 1e300;
    for (const auto& s : samples) best = std::min(best, (s.c.p - c.vec()).norm());
    return best;
}

}  // namespace

TEST_CASE("phantom without breaks has identical masks") {
    const auto c = phantom::generate(tube_spec(1));
    CHECK(c.broken_mask.values() == c.gt_mask.values());
    CHECK(c.gt_mask.count_nonzero() > 0);
    CHECK(c.volume.dims() == c.gt_mask.dims());
    CHECK(c.volume.spacing() == Spacing{0.5, 0.5, 0.5});
}

TEST_CASE("one break adds one component") {
    auto s = tube_spec(2);
    s.breaks.push_back({0, 18, 28});
    const auto c = phantom::generate(s);
    CHECK(connected_components(c.broken_mask).count() == connected_components(c.gt_mask).count() + 1);
    REQUIRE(c.break_records.size() == 1);
    CHECK(c.break_records[0].should_reconnect);
    CHECK(c.volume.values() == phantom::generate(tube_spec(2)).volume.values());

    s.occlusion = true;
    const auto o = phantom::generate(s);
    const auto& ax = c.gt_centerlines[0].points;
    double cut = 0.0, kept = 0.0;
    int nc = 0, nk = 0;
    for (const auto& p : ax) {
        if (c.gt_mask.at(p) > 0.5f && c.broken_mask.at(p) < 0.5f) {
            cut += o.volume.at(p);
            ++nc;
        } else {
            kept += o.volume.at(p);
            ++nk;
        }
    }
    REQUIRE(nc > 0);
    CHECK(cut / nc < 100.0);
    CHECK(kept / nk > 200.0);
}

TEST_CASE("phantom generation is deterministic per seed") {
    const auto a = phantom::generate(tube_spec(5));
    const auto b = phantom::generate(tube_spec(5));
    const auto c = phantom::generate(tube_spec(6));
    CHECK(a.volume.values() == b.volume.values());
    CHECK(a.gt_mask.values() == b.gt_mask.values());
    CHECK(a.volume.values() != c.volume.values());
    CHECK(a.gt_mask.values() == c.gt_mask.values());
}

TEST_CASE("invalid specs are rejected") {
    auto expect_invalid = [](const phantom::PhantomSpec& s) {
        try {
            phantom::validate(s);
            FAIL("expected SpecInvalid");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::SpecInvalid);
        }
    };
    auto s = tube_spec(1);
    s.branches[0].radii = {-1.0};
    expect_invalid(s);
    s = tube_spec(1);
    s.breaks.push_back({0, 10, 500});
    expect_invalid(s);
    s = tube_spec(1);
    s.breaks.push_back({3, 1, 2});
    expect_invalid(s);
    s = tube_spec(1);
    s.branches[0].control.resize(1);
    expect_invalid(s);
    CHECK_THROWS_AS(phantom::spec_from_json("{\"dims\":[1,2]}"), Error);
}

TEST_CASE("standard suite invariants") {
    const auto suite = phantom::standard_suite();
    CHECK(suite.size() >= 12);
    std::set<std::string> names, categories;
    for (const auto& c : suite) {
        CAPTURE(c.spec.name);
        names.insert(c.spec.name);
        categories.insert(c.spec.category);

        Volume decoys = Volume::like(c.gt_mask, VolumeKind::BinaryMask);
        for (const auto& d : c.spec.decoys) {
            const auto samples = phantom::sample_tube(d);
            phantom::rasterize_tube(decoys, samples, 0.0, samples.back().c.s);
        }
        bool subset = true;
        for (std::size_t i = 0; i < c.gt_mask.size(); ++i)
            if (c.broken_mask.data()[i] > 0.5f && c.gt_mask.data()[i] < 0.5f && decoys.data()[i] < 0.5f) subset = false;
        CHECK(subset);

        REQUIRE(c.gt_centerlines.size() == c.spec.branches.size());
        for (std::size_t b = 0; b < c.gt_centerlines.size(); ++b) {
            const auto samples = phantom::sample_tube(c.spec.branches[b]);
            const auto& pts = c.gt_centerlines[b].points;
            REQUIRE_FALSE(pts.empty());
            for (std::size_t i = 0; i < pts.size(); ++i) {
                CHECK(c.gt_mask.at(pts[i]) > 0.5f);
                CHECK(axis_distance(samples, pts[i]) <= 1.0);
                if (i > 0) CHECK(chebyshev(pts[i - 1], pts[i]) == 1);
            }
        }

        const int gt_count = connected_components(c.gt_mask).count();
        const int broken_count = connected_components(c.broken_mask).count();
        CHECK(broken_count == gt_count + int(c.spec.breaks.size()) + int(c.spec.decoys.size()));
        CHECK(c.break_records.size() == c.spec.breaks.size() + c.spec.decoys.size());
        for (const auto& r : c.break_records) CHECK(r.should_reconnect != r.decoy);
    }
    CHECK(names.size() == suite.size());
    for (const char* cat : {"straight-gap", "curved-gap", "branch-occurrence", "decoy-removal", "long-gap", "torus"})
        CHECK(categories.count(cat) == 1);
    const auto& straight = std::count_if(suite.begin(), suite.end(), [](const auto& c) {
        return c.spec.name.rfind("straight-gap-", 0) == 0;
    });
    CHECK(straight == 5);
    CHECK(std::any_of(suite.begin(), suite.end(), [](const auto& c) {
        return c.spec.category == "long-gap" && c.spec.breaks[0].end - c.spec.breaks[0].start > 20;
    }));
}

TEST_CASE("spec JSON and case files round-trip") {
    auto s = tube_spec(9);
    s.breaks.push_back({0, 10, 16});
    s.decoys.push_back({{{5, 3, 3}, {20, 4, 4}}, {1.5}});
    s.occlusion = true;
    const auto text = phantom::spec_to_json(s);
    const auto back = phantom::spec_from_json(text);
    CHECK(phantom::spec_to_json(back) == text);

    const auto c = phantom::generate(s);
    const auto dir = testing::temp_dir("phantom_case");
    phantom::save_case(c, dir);
    const auto l = phantom::load_case(dir);
    CHECK(l.volume.values() == c.volume.values());
    CHECK(l.gt_mask.values() == c.gt_mask.values());
    CHECK(l.broken_mask.values() == c.broken_mask.values());
    REQUIRE(l.gt_centerlines.size() == c.gt_centerlines.size());
    CHECK(l.gt_centerlines[0].points == c.gt_centerlines[0].points);
    REQUIRE(l.break_records.size() == c.break_records.size());
    CHECK(l.break_records[1].decoy);
    CHECK(phantom::spec_to_json(l.spec) == text);
}
