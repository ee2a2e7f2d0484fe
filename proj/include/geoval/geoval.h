/* C interface to the geoval evaluation library.
 *
 * Every function returns a gv_status. On failure the message is available
 * from gv_last_error() on the calling thread until the next call. Objects are
 * opaque handles released with their _destroy function; strings returned
 * through char** are released with gv_string_free.
 */
#ifndef GEOVAL_GEOVAL_H
#define GEOVAL_GEOVAL_H

#include <stddef.h>

#if defined(_WIN32)
#if defined(GEOVAL_BUILDING)
#define GV_API __declspec(dllexport)
#else
#define GV_API __declspec(dllimport)
#endif
#else
#define GV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gv_status {
  GV_OK = 0,
  GV_ERR_INTERNAL = 1,
  GV_ERR_CONFIG = 2,
  GV_ERR_DATA = 3,
  GV_ERR_PIPELINE = 4,
  GV_ERR_INVALID_ARGUMENT = 5,
  GV_ERR_IO = 6
} gv_status;

typedef struct gv_config gv_config;
typedef struct gv_report gv_report;

/* Receives one line-delimited JSON log record (without newline). */
typedef void (*gv_log_fn)(const char* line, void* user);

GV_API const char* gv_version(void);
GV_API const char* gv_last_error(void);
GV_API void gv_string_free(char* s);

/* Log lines go to stderr unless a callback is installed; NULL restores stderr.
 * gv_set_log_enabled(0) silences logging. */
GV_API void gv_set_log_callback(gv_log_fn fn, void* user);
GV_API void gv_set_log_enabled(int enabled);

/* ---- configuration ---- */
GV_API gv_status gv_config_create(gv_config** out);
GV_API gv_status gv_config_load(const char* path, gv_config** out);
GV_API gv_status gv_config_parse(const char* text, gv_config** out);
/* Sets a dotted key ("k", "gbrt.max_depth", "synth.trend.direction") to a
 * scalar or flow value. */
GV_API gv_status gv_config_set(gv_config* cfg, const char* key, const char* value);
/* Scalar value of a key as written; GV_ERR_CONFIG when absent. */
GV_API gv_status gv_config_get(const gv_config* cfg, const char* key, char** out);
/* Validates and returns the fully defaulted configuration as JSON. */
GV_API gv_status gv_config_resolved_json(const gv_config* cfg, char** out);
GV_API void gv_config_destroy(gv_config* cfg);

/* ---- pipeline verbs ---- */
GV_API gv_status gv_run(const gv_config* cfg, gv_report** out);
GV_API gv_status gv_diagnose(const gv_config* cfg, gv_report** out);
GV_API gv_status gv_select(const gv_config* cfg, gv_report** out);
GV_API gv_status gv_compare_cv(const gv_config* cfg, gv_report** out);
/* Writes the configured synthetic dataset as CSV plus a ground-truth JSON
 * sidecar (truth_path may be NULL). */
GV_API gv_status gv_synth_write(const gv_config* cfg, const char* csv_path, const char* truth_path);

typedef struct gv_eval_columns {
  const char* observed;     /* default "observed" */
  const char* predicted;    /* default "predicted" */
  const char* target;       /* optional grouping column, default "target" */
  const char* stratum;      /* optional, NULL to skip */
  const char* depth;        /* optional, NULL to skip */
  const char* fold;         /* optional, NULL to skip */
  size_t unstable_floor;    /* 0 selects the default of 10 */
} gv_eval_columns;

GV_API gv_status gv_evaluate_csv(const char* csv_path, const gv_eval_columns* columns, gv_report** out);

/* ---- reports ---- */
GV_API gv_status gv_report_load(const char* path, gv_report** out);
GV_API gv_status gv_report_write(const gv_report* report, const char* path);
/* Writes the fitted-model file; only reports produced by gv_run carry one. */
GV_API gv_status gv_report_write_model(const gv_report* report, const char* path);
GV_API gv_status gv_report_json(const gv_report* report, char** out);
/* Metric rows flattened into a comma-delimited table. */
GV_API gv_status gv_report_metrics_table(const gv_report* report, char** out);
/* SVG figures into dir; *n_written and *n_skipped may be NULL. Skipped
 * plots are logged as warnings. */
GV_API gv_status gv_report_emit_plots(const gv_report* report, const char* dir, size_t* n_written,
                                      size_t* n_skipped);
GV_API void gv_report_destroy(gv_report* report);

/* ---- numeric kernels ---- */
typedef struct gv_metrics {
  size_t n;
  double rmse;
  double mae;
  double ccc_log1p;
  double willmott_d15;
  double rpiq;
  double bias;
  double nrmse_minmax;
} gv_metrics;

typedef struct gv_test_result {
  double statistic;
  double standardized; /* Anderson-Darling only, NaN for KS */
  double p_value;
  int approximate;
  int clamped;
} gv_test_result;

/* Metrics whose preconditions fail are NaN. */
GV_API gv_status gv_compute_metrics(const double* y, const double* yhat, size_t n, gv_metrics* out);
/* transform: 0 identity, 1 log1p. */
GV_API gv_status gv_ccc(const double* y, const double* yhat, size_t n, int transform, double* out);
GV_API gv_status gv_ks_two_sample(const double* a, size_t na, const double* b, size_t nb, gv_test_result* out);
GV_API gv_status gv_ad_two_sample(const double* a, size_t na, const double* b, size_t nb, gv_test_result* out);
GV_API gv_status gv_conformal_quantile(const double* residuals, size_t n, double alpha, double* out);
GV_API gv_status gv_haversine_km(double lat1, double lon1, double lat2, double lon2, double* out);

#ifdef __cplusplus
}
#endif

#endif /* GEOVAL_GEOVAL_H */
