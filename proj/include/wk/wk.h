#ifndef WK_WK_H
#define WK_WK_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define WK_API __declspec(dllexport)
#else
#define WK_API __attribute__((visibility("default")))
#endif

typedef enum wk_status {
  WK_OK = 0,
  WK_ERR_ARGUMENT = 1,      /* null pointer or out-of-range argument */
  WK_ERR_CONFIG = 2,        /* malformed or incomplete experiment config */
  WK_ERR_STAGE = 3,         /* a pipeline stage failed; the bundle is partial */
  WK_ERR_PRECONDITION = 4,
  WK_ERR_CONVERGENCE = 5,
  WK_ERR_REGIME = 6,
  WK_ERR_IO = 7,
  WK_ERR_INTERNAL = 8
} wk_status;

typedef struct wk_config wk_config;
typedef struct wk_bundle wk_bundle;

/* Message of the last failing call on this thread; never NULL. */
WK_API const char* wk_last_error(void);
WK_API const char* wk_version(void);

/* configs */
WK_API wk_status wk_config_load(const char* path_or_bundled_name, wk_config** out);
WK_API wk_status wk_config_parse(const char* json_text, wk_config** out);
WK_API wk_status wk_config_set_rungs(wk_config* config, int rungs);
WK_API wk_status wk_config_set_seed(wk_config* config, uint64_t seed);
/* Normalized JSON of the config; owned by the handle. */
WK_API const char* wk_config_json(const wk_config* config);
WK_API void wk_config_free(wk_config* config);

WK_API size_t wk_bundled_count(void);
WK_API const char* wk_bundled_name(size_t index);
WK_API const char* wk_bundled_description(size_t index);

/* Runs the pipeline and writes the bundle into out_dir. Returns WK_ERR_STAGE
   when any stage failed; *out is still set in that case. */
WK_API wk_status wk_run(const wk_config* config, const char* out_dir, wk_bundle** out);
WK_API size_t wk_bundle_stage_count(const wk_bundle* bundle);
WK_API const char* wk_bundle_stage_name(const wk_bundle* bundle, size_t index);
/* "ok", "failed" or "skipped" */
WK_API const char* wk_bundle_stage_status(const wk_bundle* bundle, size_t index);
WK_API const char* wk_bundle_stage_error(const wk_bundle* bundle, size_t index);
WK_API const char* wk_bundle_summary_json(const wk_bundle* bundle);
WK_API void wk_bundle_free(wk_bundle* bundle);

/* Rung-wise ratio table (CSV) of bundle b against bundle a. Free with wk_string_free. */
WK_API wk_status wk_compare(const char* dir_a, const char* dir_b, char** table_out);
WK_API void wk_string_free(char* s);

/* numerics */
WK_API wk_status wk_ball_capacity(double a, double b, int dim, double p, double* out);
WK_API wk_status wk_select_nu(double p, double alpha, int dim, double margin, double* out);
/* example: 0 cone complement, 1 power cusp, 2 power cusp with alpha = p - 1 */
WK_API wk_status wk_literature_threshold(int example, double p, double alpha, int dim, double s,
                                         double* literature, double* here);

#ifdef __cplusplus
}
#endif

#endif
