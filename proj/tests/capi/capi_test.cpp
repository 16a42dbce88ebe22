#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "vesselrepair/vesselrepair.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
    std::string out = s ? s : "";
    vr_string_free(s);
    return out;
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("vr_capi_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("status names and version") {
    CHECK(std::string(vr_version()).size() > 0);
    CHECK(std::string(vr_status_name(VR_OK)) == "Ok");
    CHECK(std::string(vr_status_name(VR_ERR_CONFIG_INVALID)) == "ConfigInvalid");
    CHECK(std::string(vr_status_name(static_cast<vr_status>(99))) == "Unknown");
}

TEST_CASE("volume handles") {
    std::vector<float> data(4 * 3 * 2);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = float(i);
    vr_volume* v = nullptr;
    REQUIRE(vr_volume_create(4, 3, 2, 0.5, 0.5, 1.0, VR_KIND_INTENSITY, data.data(), &v) == VR_OK);
    int dims[3];
    double sp[3];
    CHECK(vr_volume_dims(v, dims) == VR_OK);
    CHECK((dims[0] == 4 && dims[1] == 3 && dims[2] == 2));
    CHECK(vr_volume_spacing(v, sp) == VR_OK);
    CHECK(sp[2] == 1.0);
    const float* ptr = nullptr;
    size_t count = 0;
    CHECK(vr_volume_data(v, &ptr, &count) == VR_OK);
    CHECK(count == data.size());
    CHECK(ptr[7] == 7.0f);

    const auto dir = scratch("volume");
    const std::string path = (dir / "v.nii").string();
    CHECK(vr_volume_save(v, path.c_str(), nullptr) == VR_OK);
    vr_volume* back = nullptr;
    REQUIRE(vr_volume_load(path.c_str(), VR_KIND_INTENSITY, &back) == VR_OK);
    CHECK(vr_volume_data(back, &ptr, &count) == VR_OK);
    CHECK(ptr[23] == 23.0f);
    vr_volume_free(back);
    vr_volume_free(v);

    vr_volume* bad = nullptr;
    CHECK(vr_volume_create(0, 1, 1, 1, 1, 1, VR_KIND_MASK, nullptr, &bad) == VR_ERR_INVALID_ARGUMENT);
    CHECK(bad == nullptr);
    CHECK(std::string(vr_last_error()).size() > 0);
    CHECK(vr_volume_load((dir / "missing.nii").string().c_str(), VR_KIND_MASK, &bad) == VR_ERR_IO);
    float half = 0.5f;
    CHECK(vr_volume_create(1, 1, 1, 1, 1, 1, VR_KIND_MASK, &half, &bad) != VR_OK);
    CHECK(vr_volume_dims(nullptr, dims) == VR_ERR_INVALID_ARGUMENT);
    vr_volume_free(nullptr);
}

TEST_CASE("config round trip and validation") {
    vr_config* c = nullptr;
    REQUIRE(vr_config_default(&c) == VR_OK);
    char* text = nullptr;
    REQUIRE(vr_config_to_json(c, &text) == VR_OK);
    const std::string json = take(text);
    const auto j = nlohmann::json::parse(json);
    CHECK(j["reconnect"]["walk"]["omega"] == 5.0);
    CHECK(j["metrics"]["alpha"] == 0.5);
    CHECK(j["reconnect"]["oracle"]["big_patch"] == 15);

    vr_config* again = nullptr;
    REQUIRE(vr_config_from_json(json.c_str(), &again) == VR_OK);
    REQUIRE(vr_config_to_json(again, &text) == VR_OK);
    CHECK(take(text) == json);

    CHECK(vr_config_set(again, "reconnect.walk.omega=0") == VR_OK);
    REQUIRE(vr_config_to_json(again, &text) == VR_OK);
    CHECK(nlohmann::json::parse(take(text))["reconnect"]["walk"]["omega"] == 0.0);
    CHECK(vr_config_set(again, "reconnect.walk.speed=3") == VR_ERR_CONFIG_INVALID);
    CHECK(vr_config_set(again, "metrics.alpha=\"high\"") == VR_ERR_CONFIG_INVALID);

    vr_config* bad = nullptr;
    CHECK(vr_config_from_json("{\"reconnect\":{\"omegga\":1}}", &bad) == VR_ERR_CONFIG_INVALID);
    CHECK(std::string(vr_last_error()).find("omegga") != std::string::npos);
    CHECK(vr_config_from_json("{not json", &bad) == VR_ERR_CONFIG_INVALID);
    CHECK(vr_config_from_json("{\"lumen\":{\"n_policy\":{\"kind\":\"spiral\"}}}", &bad) == VR_ERR_CONFIG_INVALID);
    CHECK(vr_config_from_json("{\"metrics\":{\"soft_iters\":2.5}}", &bad) == VR_ERR_CONFIG_INVALID);
    CHECK(bad == nullptr);
    vr_config_free(again);
    vr_config_free(c);
}

TEST_CASE("phantom repair through the C interface") {
    char* spec = nullptr;
    REQUIRE(vr_phantom_spec("single_tree_break", &spec) == VR_OK);
    const std::string spec_json = take(spec);
    CHECK(vr_phantom_spec("no_such_case", &spec) == VR_ERR_SPEC_INVALID);
    const auto dir = scratch("phantom");
    REQUIRE(vr_phantom_generate(spec_json.c_str(), dir.string().c_str()) == VR_OK);

    vr_volume *image = nullptr, *broken = nullptr, *gt = nullptr;
    REQUIRE(vr_volume_load((dir / "volume.json").string().c_str(), VR_KIND_INTENSITY, &image) == VR_OK);
    REQUIRE(vr_volume_load((dir / "broken_mask.json").string().c_str(), VR_KIND_MASK, &broken) == VR_OK);
    REQUIRE(vr_volume_load((dir / "gt_mask.json").string().c_str(), VR_KIND_MASK, &gt) == VR_OK);

    vr_config* c = nullptr;
    REQUIRE(vr_config_default(&c) == VR_OK);
    REQUIRE(vr_config_set(c, "reconnect.tree_components=1") == VR_OK);
    vr_reconnect_result* rr = nullptr;
    REQUIRE(vr_reconnect(image, broken, c, gt, &rr) == VR_OK);
    int stitches = 0;
    CHECK(vr_reconnect_stitch_count(rr, &stitches) == VR_OK);
    CHECK(stitches == 1);
    char* s = nullptr;
    REQUIRE(vr_reconnect_report_json(rr, &s) == VR_OK);
    const auto report = nlohmann::json::parse(take(s));
    CHECK(report.contains("pairs"));
    REQUIRE(vr_reconnect_stitches_jsonl(rr, &s) == VR_OK);
    const std::string stitch_lines = take(s);
    REQUIRE(vr_reconnect_branches_jsonl(rr, &s) == VR_OK);
    CHECK(!take(s).empty());

    vr_volume* refined = nullptr;
    REQUIRE(vr_reconnect_refined(rr, &refined) == VR_OK);
    vr_reconstruct_result* rc = nullptr;
    REQUIRE(vr_reconstruct(image, refined, stitch_lines.c_str(), c, 1, &rc) == VR_OK);
    int tubes = 0;
    CHECK(vr_reconstruct_tube_count(rc, &tubes) == VR_OK);
    CHECK(tubes == 1);
    vr_volume* final_mask = nullptr;
    REQUIRE(vr_reconstruct_final(rc, &final_mask) == VR_OK);
    int comps = 0;
    CHECK(vr_volume_count_components(final_mask, &comps) == VR_OK);
    CHECK(comps == 1);
    const auto stl = dir / "tube.stl";
    CHECK(vr_reconstruct_write_stl(rc, stl.string().c_str()) == VR_OK);
    CHECK(fs::file_size(stl) > 84);
    CHECK((fs::file_size(stl) - 84) % 50 == 0);
    REQUIRE(vr_reconstruct_contours_jsonl(rc, &s) == VR_OK);
    CHECK(!take(s).empty());

    char* metrics = nullptr;
    REQUIRE(vr_metrics(final_mask, gt, c, nullptr, &metrics) == VR_OK);
    const auto after = nlohmann::json::parse(take(metrics));
    REQUIRE(vr_metrics(broken, gt, c, nullptr, &metrics) == VR_OK);
    const auto before = nlohmann::json::parse(take(metrics));
    CHECK(after["dice"].get<double>() > before["dice"].get<double>());

    vr_reconstruct_result* empty = nullptr;
    REQUIRE(vr_reconstruct(image, refined, nullptr, c, 0, &empty) == VR_OK);
    vr_volume* same = nullptr;
    REQUIRE(vr_reconstruct_final(empty, &same) == VR_OK);
    const float *a = nullptr, *b = nullptr;
    size_t na = 0, nb = 0;
    vr_volume_data(same, &a, &na);
    vr_volume_data(refined, &b, &nb);
    REQUIRE(na == nb);
    CHECK(std::equal(a, a + na, b));
    CHECK(vr_reconstruct(image, refined, "{\"centerline\": 5}\n", c, 0, &empty) != VR_OK);

    vr_reconstruct_free(empty);
    vr_volume_free(same);
    vr_volume_free(final_mask);
    vr_reconstruct_free(rc);
    vr_volume_free(refined);
    vr_reconnect_free(rr);
    vr_config_free(c);
    vr_volume_free(image);
    vr_volume_free(broken);
    vr_volume_free(gt);
}

TEST_CASE("adf through the C interface") {
    std::vector<double> noise;
    unsigned long long x = 12345;
    for (int i = 0; i < 200; ++i) {
        x = x * 6364136223846793005ULL + 1442695040888963407ULL;
        noise.push_back(double(x >> 11) * 0x1.0p-53 - 0.5);
    }
    double stat = 0, p = 1;
    int lags = -1, nobs = 0;
    REQUIRE(vr_adf(noise.data(), noise.size(), -1, &stat, &p, &lags, &nobs) == VR_OK);
    CHECK(p < 0.05);
    CHECK(nobs > 0);
    CHECK(vr_adf(noise.data(), 3, -1, &stat, &p, &lags, &nobs) == VR_ERR_TOO_SHORT);
    const std::vector<double> flat(50, 2.0);
    CHECK(vr_adf(flat.data(), flat.size(), 0, &stat, &p, &lags, &nobs) == VR_ERR_CONSTANT_SERIES);
}
