#ifndef VESSELREPAIR_H
#define VESSELREPAIR_H

#include <stddef.h>

#if defined(_WIN32)
#define VR_API __declspec(dllexport)
#else
#define VR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vr_status {
    VR_OK = 0,
    VR_ERR_INVALID_ARGUMENT = 1,
    VR_ERR_IO = 2,
    VR_ERR_UNSUPPORTED_DATATYPE = 3,
    VR_ERR_HEADER_CORRUPT = 4,
    VR_ERR_SIZE_MISMATCH = 5,
    VR_ERR_EMPTY_MASK = 6,
    VR_ERR_EMPTY_SKELETON = 7,
    VR_ERR_EVEN_KERNEL = 8,
    VR_ERR_DIM_MISMATCH = 9,
    VR_ERR_TOO_SHORT = 10,
    VR_ERR_CONSTANT_SERIES = 11,
    VR_ERR_UNTRAINED_ORACLE = 12,
    VR_ERR_DEGENERATE_TANGENT = 13,
    VR_ERR_SPEC_INVALID = 14,
    VR_ERR_CONFIG_INVALID = 15,
    VR_ERR_INTERNAL = 16
} vr_status;

typedef enum vr_kind {
    VR_KIND_INTENSITY = 0,
    VR_KIND_MASK = 1,
    VR_KIND_PROBABILITY = 2,
    VR_KIND_DISTANCE = 3
} vr_kind;

typedef struct vr_volume vr_volume;
typedef struct vr_config vr_config;
typedef struct vr_reconnect_result vr_reconnect_result;
typedef struct vr_reconstruct_result vr_reconstruct_result;

VR_API const char* vr_version(void);
VR_API const char* vr_status_name(vr_status status);
/* Message of the last failed call on this thread; empty after success. */
VR_API const char* vr_last_error(void);
/* Caps worker threads; n <= 0 restores the hardware default. */
VR_API void vr_set_threads(int n);
/* Releases strings returned through char** out-parameters. */
VR_API void vr_string_free(char* s);

/* Volumes. Data is float32, x fastest. */
VR_API vr_status vr_volume_create(int nx, int ny, int nz, double sx, double sy, double sz, vr_kind kind,
                                  const float* data, vr_volume** out);
VR_API vr_status vr_volume_load(const char* path, vr_kind kind, vr_volume** out);
/* dtype: "u8", "i16", "f32" or NULL for the kind's default. */
VR_API vr_status vr_volume_save(const vr_volume* vol, const char* path, const char* dtype);
VR_API vr_status vr_volume_dims(const vr_volume* vol, int dims[3]);
VR_API vr_status vr_volume_spacing(const vr_volume* vol, double spacing[3]);
/* Borrowed pointer, valid until the volume is freed. */
VR_API vr_status vr_volume_data(const vr_volume* vol, const float** data, size_t* count);
VR_API vr_status vr_volume_count_components(const vr_volume* mask, int* count);
VR_API void vr_volume_free(vr_volume* vol);

/* Configuration. */
VR_API vr_status vr_config_default(vr_config** out);
VR_API vr_status vr_config_from_json(const char* text, vr_config** out);
VR_API vr_status vr_config_load(const char* path, vr_config** out);
/* "section.key=value" override. */
VR_API vr_status vr_config_set(vr_config* config, const char* assignment);
VR_API vr_status vr_config_to_json(const vr_config* config, char** out);
VR_API void vr_config_free(vr_config* config);

/* Reconnection. gt may be NULL; with it the report carries reconnection counts. */
VR_API vr_status vr_reconnect(const vr_volume* image, const vr_volume* mask, const vr_config* config,
                              const vr_volume* gt, vr_reconnect_result** out);
VR_API vr_status vr_reconnect_refined(const vr_reconnect_result* result, vr_volume** out);
VR_API vr_status vr_reconnect_report_json(const vr_reconnect_result* result, char** out);
VR_API vr_status vr_reconnect_stitches_jsonl(const vr_reconnect_result* result, char** out);
VR_API vr_status vr_reconnect_branches_jsonl(const vr_reconnect_result* result, char** out);
VR_API vr_status vr_reconnect_stitch_count(const vr_reconnect_result* result, int* count);
VR_API void vr_reconnect_free(vr_reconnect_result* result);

/* Reconstruction from stitch (or branch) JSON lines; centerlines may be NULL or empty. */
VR_API vr_status vr_reconstruct(const vr_volume* image, const vr_volume* refined, const char* centerlines_jsonl,
                                const vr_config* config, int with_mesh, vr_reconstruct_result** out);
VR_API vr_status vr_reconstruct_final(const vr_reconstruct_result* result, vr_volume** out);
VR_API vr_status vr_reconstruct_tube_count(const vr_reconstruct_result* result, int* count);
VR_API vr_status vr_reconstruct_contours_jsonl(const vr_reconstruct_result* result, char** out);
VR_API vr_status vr_reconstruct_write_stl(const vr_reconstruct_result* result, const char* path);
VR_API void vr_reconstruct_free(vr_reconstruct_result* result);

/* Metric report JSON. reference_centerlines_jsonl may be NULL. */
VR_API vr_status vr_metrics(const vr_volume* pred, const vr_volume* gt, const vr_config* config,
                            const char* reference_centerlines_jsonl, char** report_json);

/* Phantoms. */
VR_API vr_status vr_phantom_generate(const char* spec_json, const char* out_dir);
/* Writes every standard suite case to out_dir/<name>. */
VR_API vr_status vr_phantom_suite(const char* out_dir, int* count);
/* Spec JSON of a built-in case: a suite case name or "single_tree_break". */
VR_API vr_status vr_phantom_spec(const char* name, char** out);

/* Augmented Dickey-Fuller test; max_lags < 0 uses the default bound. */
VR_API vr_status vr_adf(const double* series, size_t n, int max_lags, double* statistic, double* p_value,
                        int* lags, int* n_obs);

#ifdef __cplusplus
}
#endif

#endif
