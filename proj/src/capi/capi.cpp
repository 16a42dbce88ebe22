#include <cstring>
#include <fstream>
#include <new>
#include <nlohmann/json.hpp>

#include "common/error.hpp"
#include "common/parallel.hpp"
#include "phantom/phantom.hpp"
#include "pipeline/pipeline.hpp"
#include "stats/adf.hpp"
#include "vesselrepair/vesselrepair.h"
#include "volgrid/io.hpp"
#include "volgrid/ops.hpp"

struct vr_volume {
    vr::Volume v;
};
struct vr_config {
    vr::pipeline::PipelineConfig c;
};
struct vr_reconnect_result {
    vr::recon::ReconnectionOutput r;
};
struct vr_reconstruct_result {
    vr::pipeline::ReconstructOutput r;
};

namespace {

thread_local std::string g_last_error;

template <class F>
vr_status guarded(F&& body) {
    try {
        body();
        g_last_error.clear();
        return VR_OK;
    } catch (const vr::Error& e) {
        g_last_error = e.what();
        return static_cast<vr_status>(e.code());
    } catch (const nlohmann::json::exception& e) {
        g_last_error = e.what();
        return VR_ERR_INVALID_ARGUMENT;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return VR_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return VR_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return VR_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    if (!p) vr::fail(vr::ErrorCode::InvalidArgument, std::string(what) + " is null");
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

vr::VolumeKind to_kind(vr_kind k) {
    switch (k) {
        case VR_KIND_INTENSITY: return vr::VolumeKind::Intensity;
        case VR_KIND_MASK: return vr::VolumeKind::BinaryMask;
        case VR_KIND_PROBABILITY: return vr::VolumeKind::Probability;
        case VR_KIND_DISTANCE: return vr::VolumeKind::Distance;
    }
    vr::fail(vr::ErrorCode::InvalidArgument, "unknown volume kind");
}

const vr::pipeline::PipelineConfig& config_or_default(const vr_config* c) {
    static const vr::pipeline::PipelineConfig defaults;
    return c ? c->c : defaults;
}

}  // namespace

extern "C" {

const char* vr_version(void) { return "0.1.0"; }

const char* vr_status_name(vr_status status) {
    if (status == VR_OK) return "Ok";
    if (status < VR_ERR_INVALID_ARGUMENT || status > VR_ERR_INTERNAL) return "Unknown";
    return vr::error_code_name(static_cast<vr::ErrorCode>(status));
}

const char* vr_last_error(void) { return g_last_error.c_str(); }

void vr_set_threads(int n) { vr::set_thread_count(n); }

void vr_string_free(char* s) { std::free(s); }

vr_status vr_volume_create(int nx, int ny, int nz, double sx, double sy, double sz, vr_kind kind, const float* data,
                           vr_volume** out) {
    return guarded([&] {
        need(out, "out");
        *out = nullptr;
        if (nx <= 0 || ny <= 0 || nz <= 0) vr::fail(vr::ErrorCode::InvalidArgument, "dimensions must be positive");
        if (!(sx > 0 && sy > 0 && sz > 0)) vr::fail(vr::ErrorCode::InvalidArgument, "spacing must be positive");
        vr::Volume v({nx, ny, nz}, {sx, sy, sz}, to_kind(kind));
        if (data) std::memcpy(v.data().data(), data, v.size() * sizeof(float));
        v.validate();
        *out = new vr_volume{std::move(v)};
    });
}

vr_status vr_volume_load(const char* path, vr_kind kind, vr_volume** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = nullptr;
        *out = new vr_volume{vr::load_volume(path, to_kind(kind))};
    });
}

vr_status vr_volume_save(const vr_volume* vol, const char* path, const char* dtype) {
    return guarded([&] {
        need(vol, "volume");
        need(path, "path");
        const vr::DType t = dtype ? vr::dtype_from_name(dtype) : vr::default_dtype(vol->v.kind());
        vr::save_volume(vol->v, path, t);
    });
}

vr_status vr_volume_dims(const vr_volume* vol, int dims[3]) {
    return guarded([&] {
        need(vol, "volume");
        need(dims, "dims");
        dims[0] = vol->v.dims().nx;
        dims[1] = vol->v.dims().ny;
        dims[2] = vol->v.dims().nz;
    });
}

vr_status vr_volume_spacing(const vr_volume* vol, double spacing[3]) {
    return guarded([&] {
        need(vol, "volume");
        need(spacing, "spacing");
        spacing[0] = vol->v.spacing().sx;
        spacing[1] = vol->v.spacing().sy;
        spacing[2] = vol->v.spacing().sz;
    });
}

vr_status vr_volume_data(const vr_volume* vol, const float** data, size_t* count) {
    return guarded([&] {
        need(vol, "volume");
        need(data, "data");
        need(count, "count");
        *data = vol->v.data().data();
        *count = vol->v.size();
    });
}

vr_status vr_volume_count_components(const vr_volume* mask, int* count) {
    return guarded([&] {
        need(mask, "mask");
        need(count, "count");
        *count = vr::connected_components(mask->v.thresholded(0.5f)).count();
    });
}

void vr_volume_free(vr_volume* vol) { delete vol; }

vr_status vr_config_default(vr_config** out) {
    return guarded([&] {
        need(out, "out");
        *out = new vr_config{};
    });
}

vr_status vr_config_from_json(const char* text, vr_config** out) {
    return guarded([&] {
        need(text, "text");
        need(out, "out");
        *out = nullptr;
        *out = new vr_config{vr::pipeline::config_from_string(text)};
    });
}

vr_status vr_config_load(const char* path, vr_config** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = nullptr;
        *out = new vr_config{vr::pipeline::load_config(path)};
    });
}

vr_status vr_config_set(vr_config* config, const char* assignment) {
    return guarded([&] {
        need(config, "config");
        need(assignment, "assignment");
        config->c = vr::pipeline::with_overrides(config->c, {assignment});
    });
}

vr_status vr_config_to_json(const vr_config* config, char** out) {
    return guarded([&] {
        need(config, "config");
        need(out, "out");
        *out = dup(vr::pipeline::config_to_string(config->c));
    });
}

void vr_config_free(vr_config* config) { delete config; }

vr_status vr_reconnect(const vr_volume* image, const vr_volume* mask, const vr_config* config, const vr_volume* gt,
                       vr_reconnect_result** out) {
    return guarded([&] {
        need(image, "image");
        need(mask, "mask");
        need(out, "out");
        *out = nullptr;
        auto r = vr::pipeline::reconnect(image->v, mask->v, config_or_default(config), gt ? &gt->v : nullptr);
        *out = new vr_reconnect_result{std::move(r)};
    });
}

vr_status vr_reconnect_refined(const vr_reconnect_result* result, vr_volume** out) {
    return guarded([&] {
        need(result, "result");
        need(out, "out");
        *out = new vr_volume{result->r.refined};
    });
}

vr_status vr_reconnect_report_json(const vr_reconnect_result* result, char** out) {
    return guarded([&] {
        need(result, "result");
        need(out, "out");
        *out = dup(vr::recon::report_json(result->r.report));
    });
}

vr_status vr_reconnect_stitches_jsonl(const vr_reconnect_result* result, char** out) {
    return guarded([&] {
        need(result, "result");
        need(out, "out");
        *out = dup(vr::recon::stitches_to_jsonl(result->r.stitches));
    });
}

vr_status vr_reconnect_branches_jsonl(const vr_reconnect_result* result, char** out) {
    return guarded([&] {
        need(result, "result");
        need(out, "out");
        *out = dup(vr::skel::branches_to_jsonl(result->r.branches));
    });
}

vr_status vr_reconnect_stitch_count(const vr_reconnect_result* result, int* count) {
    return guarded([&] {
        need(result, "result");
        need(count, "count");
        *count = static_cast<int>(result->r.stitches.size());
    });
}

void vr_reconnect_free(vr_reconnect_result* result) { delete result; }

vr_status vr_reconstruct(const vr_volume* image, const vr_volume* refined, const char* centerlines_jsonl,
                         const vr_config* config, int with_mesh, vr_reconstruct_result** out) {
    return guarded([&] {
        need(image, "image");
        need(refined, "refined");
        need(out, "out");
        *out = nullptr;
        const auto cls = centerlines_jsonl ? vr::pipeline::centerlines_from_jsonl(centerlines_jsonl)
                                           : std::vector<vr::skel::CenterlineBranch>{};
        auto r = vr::pipeline::reconstruct(image->v, refined->v, cls, config_or_default(config), with_mesh != 0);
        *out = new vr_reconstruct_result{std::move(r)};
    });
}

vr_status vr_reconstruct_final(const vr_reconstruct_result* result, vr_volume** out) {
    return guarded([&] {
        need(result, "result");
        need(out, "out");
        *out = new vr_volume{result->r.final_mask};
    });
}

vr_status vr_reconstruct_tube_count(const vr_reconstruct_result* result, int* count) {
    return guarded([&] {
        need(result, "result");
        need(count, "count");
        *count = result->r.tubes;
    });
}

vr_status vr_reconstruct_contours_jsonl(const vr_reconstruct_result* result, char** out) {
    return guarded([&] {
        need(result, "result");
        need(out, "out");
        std::string s;
        for (const auto& tube : result->r.contours) s += vr::lumen::contours_to_jsonl(tube);
        *out = dup(s);
    });
}

vr_status vr_reconstruct_write_stl(const vr_reconstruct_result* result, const char* path) {
    return guarded([&] {
        need(result, "result");
        need(path, "path");
        vr::ies::write_stl(path, result->r.mesh);
    });
}

void vr_reconstruct_free(vr_reconstruct_result* result) { delete result; }

vr_status vr_metrics(const vr_volume* pred, const vr_volume* gt, const vr_config* config,
                     const char* reference_centerlines_jsonl, char** report_json) {
    return guarded([&] {
        need(pred, "pred");
        need(gt, "gt");
        need(report_json, "report_json");
        std::vector<vr::skel::CenterlineBranch> ref;
        if (reference_centerlines_jsonl) ref = vr::pipeline::centerlines_from_jsonl(reference_centerlines_jsonl);
        const auto report = vr::pipeline::evaluate_metrics(pred->v, gt->v, config_or_default(config),
                                                           reference_centerlines_jsonl ? &ref : nullptr);
        *report_json = dup(vr::topo::metric_report_json(report));
    });
}

vr_status vr_phantom_generate(const char* spec_json, const char* out_dir) {
    return guarded([&] {
        need(spec_json, "spec_json");
        need(out_dir, "out_dir");
        vr::phantom::save_case(vr::phantom::generate(vr::phantom::spec_from_json(spec_json)), out_dir);
    });
}

vr_status vr_phantom_suite(const char* out_dir, int* count) {
    return guarded([&] {
        need(out_dir, "out_dir");
        const auto specs = vr::phantom::standard_suite_specs();
        for (const auto& s : specs)
            vr::phantom::save_case(vr::phantom::generate(s), std::filesystem::path(out_dir) / s.name);
        if (count) *count = static_cast<int>(specs.size());
    });
}

vr_status vr_phantom_spec(const char* name, char** out) {
    return guarded([&] {
        need(name, "name");
        need(out, "out");
        const std::string n = name;
        if (n == "single_tree_break") {
            *out = dup(vr::phantom::spec_to_json(vr::phantom::single_tree_break_spec()));
            return;
        }
        for (const auto& s : vr::phantom::standard_suite_specs())
            if (s.name == n) {
                *out = dup(vr::phantom::spec_to_json(s));
                return;
            }
        vr::fail(vr::ErrorCode::SpecInvalid, "unknown phantom case: " + n);
    });
}

vr_status vr_adf(const double* series, size_t n, int max_lags, double* statistic, double* p_value, int* lags,
                 int* n_obs) {
    return guarded([&] {
        if (n > 0) need(series, "series");
        std::optional<int> ml;
        if (max_lags >= 0) ml = max_lags;
        const auto r = vr::stats::adf_test(std::span<const double>(series, n), ml);
        if (statistic) *statistic = r.statistic;
        if (p_value) *p_value = r.p_value;
        if (lags) *lags = r.lags;
        if (n_obs) *n_obs = r.n_obs;
    });
}

}  // extern "C"
