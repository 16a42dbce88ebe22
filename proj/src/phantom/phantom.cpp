#include "phantom/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "common/error.hpp"
#include "common/random.hpp"
#include "volgrid/io.hpp"

namespace vr::phantom {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kStep = 0.25;

double radius_at(const TubeSpec& t, double param) {
    if (t.radii.size() == 1) return t.radii.front();
    const double p = std::clamp(param, 0.0, double(t.radii.size() - 1));
    const auto i = std::min(static_cast<std::size_t>(std::floor(p)), t.radii.size() - 2);
    const double f = p - double(i);
    return (1.0 - f) * t.radii[i] + f * t.radii[i + 1];
}

// Rounded axis voxels that fall inside the tube's own mask.
skel::CenterlineBranch axis_branch(const std::vector<TubeSample>& samples, const Volume& tube, int id) {
    skel::CenterlineBranch b;
    b.id = id;
    for (const auto& s : samples) {
        VoxelCoord v{int(std::lround(s.c.p.x())), int(std::lround(s.c.p.y())), int(std::lround(s.c.p.z()))};
        if (!tube.contains(v) || tube.at(v) == 0.0f) continue;
        if (!b.points.empty() && b.points.back() == v) continue;
        b.points.push_back(v);
    }
    skel::update_tangents(b);
    return b;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json tube_json(const TubeSpec& t) {
    json c = json::array();
    for (const auto& p : t.control) c.push_back(vec_json(p));
    return {{"control", c}, {"radii", t.radii}};
}

TubeSpec tube_from(const json& j) {
    TubeSpec t;
    for (const auto& p : j.at("control")) t.control.push_back(vec_from(p));
    t.radii = j.at("radii").get<std::vector<double>>();
    return t;
}

json spec_json(const PhantomSpec& s) {
    json branches = json::array(), decoys = json::array(), breaks = json::array();
    for (const auto& t : s.branches) branches.push_back(tube_json(t));
    for (const auto& t : s.decoys) decoys.push_back(tube_json(t));
    for (const auto& b : s.breaks) breaks.push_back({{"branch", b.branch}, {"start", b.start}, {"end", b.end}});
    return {{"name", s.name},
            {"category", s.category},
            {"seed", s.seed},
            {"dims", {s.dims.nx, s.dims.ny, s.dims.nz}},
            {"spacing", {s.spacing.sx, s.spacing.sy, s.spacing.sz}},
            {"branches", branches},
            {"breaks", breaks},
            {"decoys", decoys},
            {"intensity",
             {{"vessel", s.intensity.vessel}, {"background", s.intensity.background}, {"noise_sd", s.intensity.noise_sd}}},
            {"occlusion", s.occlusion}};
}

PhantomSpec spec_from(const json& j) {
    PhantomSpec s;
    s.name = j.value("name", "");
    s.category = j.value("category", "");
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto d = j.at("dims").get<std::vector<int>>();
    const auto sp = j.at("spacing").get<std::vector<double>>();
    if (d.size() != 3 || sp.size() != 3) fail(ErrorCode::SpecInvalid, "dims and spacing need three entries");
    s.dims = {d[0], d[1], d[2]};
    s.spacing = {sp[0], sp[1], sp[2]};
    for (const auto& t : j.at("branches")) s.branches.push_back(tube_from(t));
    if (j.contains("breaks"))
        for (const auto& b : j.at("breaks"))
            s.breaks.push_back({b.at("branch").get<int>(), b.at("start").get<double>(), b.at("end").get<double>()});
    if (j.contains("decoys"))
        for (const auto& t : j.at("decoys")) s.decoys.push_back(tube_from(t));
    if (j.contains("intensity")) {
        const auto& i = j.at("intensity");
        s.intensity.vessel = i.value("vessel", 300.0);
        s.intensity.background = i.value("background", 0.0);
        s.intensity.noise_sd = i.value("noise_sd", 20.0);
    }
    s.occlusion = j.value("occlusion", false);
    return s;
}

}  // namespace

std::vector<TubeSample> sample_tube(const TubeSpec& tube, double step) {
    const auto curve = catmull_rom_dense(tube.control, step);
    std::vector<TubeSample> out;
    out.reserve(curve.size());
    for (const auto& c : curve) out.push_back({c, radius_at(tube, c.param)});
    return out;
}

void rasterize_tube(Volume& mask, const std::vector<TubeSample>& samples, double s0, double s1, double grow) {
    const auto& d = mask.dims();
    for (const auto& s : samples) {
        if (s.c.s < s0 - 1e-9 || s.c.s > s1 + 1e-9) continue;
        const double r = s.radius + grow;
        const Vec3& p = s.c.p;
        const int lo_i = std::max(0, int(std::floor(p.x() - r - 1))), hi_i = std::min(d.nx - 1, int(std::ceil(p.x() + r + 1)));
        const int lo_j = std::max(0, int(std::floor(p.y() - r - 1))), hi_j = std::min(d.ny - 1, int(std::ceil(p.y() + r + 1)));
        const int lo_k = std::max(0, int(std::floor(p.z() - r - 1))), hi_k = std::min(d.nz - 1, int(std::ceil(p.z() + r + 1)));
        for (int k = lo_k; k <= hi_k; ++k)
            for (int j = lo_j; j <= hi_j; ++j)
                for (int i = lo_i; i <= hi_i; ++i) {
                    const Vec3 v = Vec3(i, j, k) - p;
                    const double a = v.dot(s.c.tangent);
                    // Slab of one step keeps consecutive discs overlapping on curved tubes.
                    if (std::abs(a) > kStep) continue;
                    if ((v - a * s.c.tangent).squaredNorm() <= r * r) mask(i, j, k) = 1.0f;
                }
    }
}

void validate(const PhantomSpec& spec) {
    if (spec.dims.nx < 1 || spec.dims.ny < 1 || spec.dims.nz < 1) fail(ErrorCode::SpecInvalid, "dims must be >= 1");
    if (!(spec.spacing.sx > 0 && spec.spacing.sy > 0 && spec.spacing.sz > 0))
        fail(ErrorCode::SpecInvalid, "spacing must be > 0");
    if (!(spec.intensity.noise_sd >= 0)) fail(ErrorCode::SpecInvalid, "noise sd must be >= 0");
    auto check_tube = [](const TubeSpec& t) {
        if (t.control.size() < 2) fail(ErrorCode::SpecInvalid, "a tube needs at least two control points");
        if (t.radii.empty() || (t.radii.size() != 1 && t.radii.size() != t.control.size()))
            fail(ErrorCode::SpecInvalid, "radii must hold one value or one per control point");
        for (double r : t.radii)
            if (!(r > 0)) fail(ErrorCode::SpecInvalid, "radii must be > 0");
    };
    for (const auto& t : spec.branches) check_tube(t);
    for (const auto& t : spec.decoys) check_tube(t);
    for (const auto& b : spec.breaks) {
        if (b.branch < 0 || b.branch >= int(spec.branches.size()))
            fail(ErrorCode::SpecInvalid, "break refers to a missing branch");
        const double length = sample_tube(spec.branches[b.branch]).back().c.s;
        if (!(b.start >= 0 && b.end > b.start && b.end <= length))
            fail(ErrorCode::SpecInvalid, "break interval must lie within the branch span");
    }
}

PhantomCase generate(const PhantomSpec& spec) {
    validate(spec);
    PhantomCase out;
    out.spec = spec;
    const Volume blank(spec.dims, spec.spacing, VolumeKind::BinaryMask);

    std::vector<std::vector<TubeSample>> samples;
    std::vector<Volume> own;
    out.gt_mask = blank;
    for (std::size_t b = 0; b < spec.branches.size(); ++b) {
        samples.push_back(sample_tube(spec.branches[b]));
        Volume m = blank;
        rasterize_tube(m, samples.back(), 0.0, samples.back().back().c.s);
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m.data()[i] != 0.0f) out.gt_mask.data()[i] = 1.0f;
        out.gt_centerlines.push_back(axis_branch(samples.back(), m, int(b)));
        own.push_back(std::move(m));
    }

    // Cut regions, sparing voxels that belong to any other branch.
    Volume cut = blank;
    for (const auto& br : spec.breaks) {
        Volume c = blank;
        rasterize_tube(c, samples[br.branch], br.start, br.end, 1.5);
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (c.data()[i] == 0.0f) continue;
            bool other = false;
            for (std::size_t b = 0; b < own.size() && !other; ++b)
                other = int(b) != br.branch && own[b].data()[i] != 0.0f;
            if (!other) cut.data()[i] = 1.0f;
        }
        out.break_records.push_back({br.branch, br.start, br.end, true, false});
    }

    Volume decoys = blank;
    for (std::size_t d = 0; d < spec.decoys.size(); ++d) {
        const auto s = sample_tube(spec.decoys[d]);
        rasterize_tube(decoys, s, 0.0, s.back().c.s);
        out.break_records.push_back({int(d), 0.0, s.back().c.s, false, true});
    }

    out.broken_mask = blank;
    for (std::size_t i = 0; i < blank.size(); ++i) {
        const bool kept = out.gt_mask.data()[i] != 0.0f && cut.data()[i] == 0.0f;
        out.broken_mask.data()[i] = (kept || decoys.data()[i] != 0.0f) ? 1.0f : 0.0f;
    }

    out.volume = Volume(spec.dims, spec.spacing, VolumeKind::Intensity);
    Gaussian noise(spec.seed);
    for (std::size_t i = 0; i < blank.size(); ++i) {
        bool bright = out.gt_mask.data()[i] != 0.0f || decoys.data()[i] != 0.0f;
        if (spec.occlusion && cut.data()[i] != 0.0f && decoys.data()[i] == 0.0f) bright = false;
        const double base = bright ? spec.intensity.vessel : spec.intensity.background;
        out.volume.data()[i] = static_cast<float>(base + spec.intensity.noise_sd * noise());
    }
    return out;
}

namespace {

constexpr Dims kSuiteDims{96, 48, 52};
constexpr Spacing kSuiteSpacing{0.5, 0.5, 0.5};

TubeSpec straight(const Vec3& a, const Vec3& b, std::vector<double> radii) {
    return {{a, 0.5 * (a + b), b}, std::move(radii)};
}

// Straight lead-in, circular arc of `bend` radians with radius rho turning
// from +x towards `side`, then a straight run-out.
TubeSpec bent_trunk(const Vec3& start, double lead, double rho, double bend, double tail, const Vec3& side,
                    double radius) {
    TubeSpec t;
    const Vec3 x = Vec3::UnitX();
    for (int i = 0; i <= 3; ++i) t.control.push_back(start + x * lead * i / 3.0);
    const Vec3 arc_start = start + x * lead;
    const Vec3 centre = arc_start + side * rho;
    const int steps = std::max(3, int(std::ceil(bend / (10.0 * kPi / 180.0))));
    for (int i = 1; i <= steps; ++i) {
        const double a = bend * i / steps;
        t.control.push_back(centre + rho * (x * std::sin(a) - side * std::cos(a)));
    }
    const Vec3 end = t.control.back();
    const Vec3 dir = x * std::cos(bend) + side * std::sin(bend);
    for (int i = 1; i <= 3; ++i) t.control.push_back(end + dir * tail * i / 3.0);
    t.radii = {radius};
    return t;
}

PhantomSpec base_case(const std::string& name, const std::string& category, std::uint64_t seed) {
    PhantomSpec s;
    s.name = name;
    s.category = category;
    s.seed = seed;
    s.dims = kSuiteDims;
    s.spacing = kSuiteSpacing;
    // Second, intact tree along the far side of the volume.
    s.branches.push_back({{{6, 16, 40}, {48, 20, 40}, {90, 16, 40}}, {2.2}});
    return s;
}

TubeSpec main_trunk(double x_end = 90) { return straight({6, 16, 14}, {x_end, 16, 14}, {2.5, 2.2, 2.0}); }

}  // namespace

std::vector<PhantomSpec> standard_suite_specs() {
    std::vector<PhantomSpec> out;
    std::uint64_t seed = 1000;
    for (double gap : {6.0, 8.0, 10.0, 12.0, 14.0}) {
        auto s = base_case("straight-gap-" + std::to_string(int(gap)), "straight-gap", seed++);
        s.branches.push_back(main_trunk());
        s.breaks.push_back({1, 46.0, 46.0 + gap});
        out.push_back(s);
    }
    {
        auto s = base_case("curved-gap-a", "curved-gap", seed++);
        s.branches.push_back(bent_trunk({6, 10, 14}, 30, 14, 80 * kPi / 180, 20, Vec3::UnitY(), 2.0));
        s.breaks.push_back({1, 30.5, 49.0});
        out.push_back(s);
    }
    {
        auto s = base_case("curved-gap-b", "curved-gap", seed++);
        s.branches.push_back(bent_trunk({6, 38, 14}, 34, 12, 90 * kPi / 180, 16, -Vec3::UnitY(), 2.0));
        s.breaks.push_back({1, 34.5, 52.5});
        out.push_back(s);
    }
    {
        auto s = base_case("branch-occurrence", "branch-occurrence", seed++);
        s.branches.push_back(main_trunk());
        const double a = 50 * kPi / 180;
        const Vec3 root{40, 16, 14};
        s.branches.push_back(straight(root, root + 36 * Vec3(std::cos(a), std::sin(a), 0), {1.8}));
        const Vec3 fork{62, 16, 14};
        s.branches.push_back(straight(fork, fork + 18 * Vec3(std::cos(a), 0, std::sin(a)), {1.8}));
        s.breaks.push_back({2, 0.0, 12.0});
        out.push_back(s);
    }
    {
        auto s = base_case("decoy-removal", "decoy-removal", seed++);
        s.branches.push_back(main_trunk(70));
        s.decoys.push_back(straight({80, 17, 14}, {93, 17, 14}, {2.0}));
        out.push_back(s);
    }
    for (double gap : {24.0, 30.0}) {
        auto s = base_case("long-gap-" + std::to_string(int(gap)), "long-gap", seed++);
        s.branches.push_back(main_trunk());
        s.breaks.push_back({1, 42.0, 42.0 + gap});
        out.push_back(s);
    }
    {
        auto s = base_case("multi-break", "multi-break", seed++);
        s.branches.push_back(main_trunk());
        s.breaks.push_back({1, 36.0, 44.0});
        s.breaks.push_back({1, 58.0, 66.0});
        out.push_back(s);
    }
    {
        auto s = base_case("torus", "torus", seed++);
        TubeSpec ring;
        for (int deg = 0; deg <= 360; deg += 15) {
            const double a = deg * kPi / 180;
            ring.control.push_back({48 + 14 * std::cos(a), 22 + 14 * std::sin(a), 14});
        }
        ring.radii = {2.0};
        s.branches.push_back(ring);
        out.push_back(s);
    }
    {
        auto s = base_case("side-branch-gap", "straight-gap", seed++);
        s.branches.push_back(main_trunk());
        const double a = 45 * kPi / 180;
        const Vec3 root{36, 16, 14};
        s.branches.push_back(straight(root, root + 40 * Vec3(std::cos(a), std::sin(a), 0), {1.8}));
        s.breaks.push_back({2, 14.0, 22.0});
        out.push_back(s);
    }
    {
        auto s = base_case("decoy-isolated", "decoy-removal", seed++);
        s.branches.push_back(main_trunk());
        s.decoys.push_back(straight({30, 40, 26}, {50, 42, 27}, {2.0}));
        out.push_back(s);
    }
    return out;
}

std::vector<PhantomCase> standard_suite() {
    std::vector<PhantomCase> out;
    for (const auto& s : standard_suite_specs()) out.push_back(generate(s));
    return out;
}

PhantomSpec single_tree_break_spec(double gap, std::uint64_t seed) {
    PhantomSpec s;
    s.name = "single-tree-break";
    s.category = "end-to-end";
    s.seed = seed;
    s.dims = {72, 32, 32};
    s.spacing = kSuiteSpacing;
    s.branches.push_back(straight({4, 16, 16}, {68, 16, 16}, {2.5, 2.2, 2.0}));
    s.breaks.push_back({0, 34.0, 34.0 + gap});
    return s;
}

std::string spec_to_json(const PhantomSpec& spec) { return spec_json(spec).dump(2); }

PhantomSpec spec_from_json(const std::string& text) {
    try {
        return spec_from(json::parse(text));
    } catch (const json::exception& e) {
        fail(ErrorCode::SpecInvalid, std::string("phantom spec: ") + e.what());
    }
}

void save_case(const PhantomCase& c, const fs::path& dir) {
    fs::create_directories(dir);
    save_volume(c.volume, dir / "volume.json", VolumeFormat::RawJson, DType::F32);
    save_volume(c.gt_mask, dir / "gt_mask.json", VolumeFormat::RawJson, DType::U8);
    save_volume(c.broken_mask, dir / "broken_mask.json", VolumeFormat::RawJson, DType::U8);
    json records = json::array();
    for (const auto& r : c.break_records)
        records.push_back({{"branch", r.branch},
                           {"start", r.start},
                           {"end", r.end},
                           {"should_reconnect", r.should_reconnect},
                           {"decoy", r.decoy}});
    json lines = json::array();
    for (const auto& b : c.gt_centerlines) {
        json pts = json::array();
        for (const auto& p : b.points) pts.push_back({p.i, p.j, p.k});
        lines.push_back({{"id", b.id}, {"points", pts}});
    }
    const json truth{{"spec", spec_json(c.spec)}, {"break_records", records}, {"gt_centerlines", lines}};
    std::ofstream f(dir / "truth.json");
    if (!f) fail(ErrorCode::Io, "cannot write " + (dir / "truth.json").string());
    f << truth.dump(1) << '\n';
}

PhantomCase load_case(const fs::path& dir) {
    PhantomCase c;
    std::ifstream f(dir / "truth.json");
    if (!f) fail(ErrorCode::Io, "cannot open " + (dir / "truth.json").string());
    std::stringstream ss;
    ss << f.rdbuf();
    try {
        const json truth = json::parse(ss.str());
        c.spec = spec_from(truth.at("spec"));
        for (const auto& r : truth.at("break_records"))
            c.break_records.push_back({r.at("branch").get<int>(), r.at("start").get<double>(), r.at("end").get<double>(),
                                       r.at("should_reconnect").get<bool>(), r.at("decoy").get<bool>()});
        for (const auto& l : truth.at("gt_centerlines")) {
            skel::CenterlineBranch b;
            b.id = l.at("id").get<int>();
            for (const auto& p : l.at("points")) b.points.push_back({p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>()});
            skel::update_tangents(b);
            c.gt_centerlines.push_back(std::move(b));
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::HeaderCorrupt, (dir / "truth.json").string() + ": " + e.what());
    }
    c.volume = load_volume(dir / "volume.json", VolumeFormat::RawJson, VolumeKind::Intensity);
    c.gt_mask = load_volume(dir / "gt_mask.json", VolumeFormat::RawJson, VolumeKind::BinaryMask);
    c.broken_mask = load_volume(dir / "broken_mask.json", VolumeFormat::RawJson, VolumeKind::BinaryMask);
    return c;
}

}  // namespace vr::phantom
