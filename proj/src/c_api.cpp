#include "geoval/geoval.h"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <mutex>

#include "geoval/conformal.hpp"
#include "geoval/metrics.hpp"
#include "geoval/pipeline.hpp"
#include "geoval/spatial.hpp"
#include "geoval/stats.hpp"
#include "report_json.hpp"

struct gv_config {
  geoval::ConfigTree tree;
};

struct gv_report {
  geoval::Json report;
  geoval::Json model;
};

namespace {

thread_local std::string g_last_error;

struct LogState {
  std::mutex mu;
  gv_log_fn fn = nullptr;
  void* user = nullptr;
  bool enabled = true;
};

LogState& log_state() {
  static LogState s;
  return s;
}

void log_line(const std::string& line) {
  auto& s = log_state();
  std::lock_guard<std::mutex> lock(s.mu);
  if (!s.enabled) return;
  if (s.fn != nullptr) {
    s.fn(line.c_str(), s.user);
  } else {
    std::cerr << line << '\n';
  }
}

template <typename F>
gv_status guard(F&& f) {
  g_last_error.clear();
  try {
    f();
    return GV_OK;
  } catch (const geoval::Error& e) {
    g_last_error = e.what();
    switch (e.kind()) {
      case geoval::ErrorKind::config: return GV_ERR_CONFIG;
      case geoval::ErrorKind::data: return GV_ERR_DATA;
      case geoval::ErrorKind::pipeline: return GV_ERR_PIPELINE;
    }
    return GV_ERR_INTERNAL;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return GV_ERR_INVALID_ARGUMENT;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return GV_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GV_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return GV_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw std::invalid_argument(std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

gv_status verb(const gv_config* cfg, gv_report** out,
               geoval::RunOutput (*fn)(const geoval::RunConfig&, const geoval::LogSink&)) {
  return guard([&] {
    require(cfg, "config");
    require(out, "out");
    *out = nullptr;
    auto result = fn(cfg->tree.resolve(), log_line);
    *out = new gv_report{std::move(result.report), std::move(result.model)};
  });
}

}  // namespace

extern "C" {

const char* gv_version(void) { return "1.0.0"; }
const char* gv_last_error(void) { return g_last_error.c_str(); }
void gv_string_free(char* s) { std::free(s); }

void gv_set_log_callback(gv_log_fn fn, void* user) {
  auto& s = log_state();
  std::lock_guard<std::mutex> lock(s.mu);
  s.fn = fn;
  s.user = user;
}

void gv_set_log_enabled(int enabled) {
  auto& s = log_state();
  std::lock_guard<std::mutex> lock(s.mu);
  s.enabled = enabled != 0;
}

gv_status gv_config_create(gv_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new gv_config{geoval::ConfigTree()};
  });
}

gv_status gv_config_load(const char* path, gv_config** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    *out = new gv_config{geoval::ConfigTree::from_file(path)};
  });
}

gv_status gv_config_parse(const char* text, gv_config** out) {
  return guard([&] {
    require(text, "text");
    require(out, "out");
    *out = nullptr;
    *out = new gv_config{geoval::ConfigTree::from_string(text)};
  });
}

gv_status gv_config_set(gv_config* cfg, const char* key, const char* value) {
  return guard([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    cfg->tree.set(key, value);
  });
}

gv_status gv_config_get(const gv_config* cfg, const char* key, char** out) {
  return guard([&] {
    require(cfg, "config");
    require(key, "key");
    require(out, "out");
    *out = nullptr;
    auto v = cfg->tree.get_scalar(key);
    if (!v) throw geoval::ConfigError(std::string("configuration key '") + key + "' is not set");
    *out = dup(*v);
  });
}

gv_status gv_config_resolved_json(const gv_config* cfg, char** out) {
  return guard([&] {
    require(cfg, "config");
    require(out, "out");
    *out = nullptr;
    *out = dup(geoval::config_to_json(cfg->tree.resolve()).dump(2));
  });
}

void gv_config_destroy(gv_config* cfg) { delete cfg; }

gv_status gv_run(const gv_config* cfg, gv_report** out) { return verb(cfg, out, &geoval::run); }
gv_status gv_diagnose(const gv_config* cfg, gv_report** out) { return verb(cfg, out, &geoval::diagnose); }
gv_status gv_select(const gv_config* cfg, gv_report** out) { return verb(cfg, out, &geoval::select); }
gv_status gv_compare_cv(const gv_config* cfg, gv_report** out) { return verb(cfg, out, &geoval::compare_cv_modes); }

gv_status gv_synth_write(const gv_config* cfg, const char* csv_path, const char* truth_path) {
  return guard([&] {
    require(cfg, "config");
    require(csv_path, "csv_path");
    const auto rc = cfg->tree.resolve();
    if (!rc.synth) throw geoval::ConfigError("synth: the configuration has no synthetic generator section");
    const auto r = geoval::generate(*rc.synth);
    const std::filesystem::path csv(csv_path);
    if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());
    geoval::save_dataset(r.dataset, csv);
    if (truth_path != nullptr) {
      geoval::Json truth = geoval::to_json(r.truth);
      truth["target"] = rc.synth->target_name;
      truth["seed"] = rc.synth->seed;
      geoval::write_json(truth, truth_path);
    }
  });
}

gv_status gv_evaluate_csv(const char* csv_path, const gv_eval_columns* columns, gv_report** out) {
  return guard([&] {
    require(csv_path, "csv_path");
    require(out, "out");
    *out = nullptr;
    geoval::EvaluateColumns cols;
    if (columns != nullptr) {
      if (columns->observed) cols.observed = columns->observed;
      if (columns->predicted) cols.predicted = columns->predicted;
      if (columns->target) cols.target_label = columns->target;
      if (columns->stratum) cols.stratum = columns->stratum;
      if (columns->depth) cols.depth = columns->depth;
      if (columns->fold) cols.fold = columns->fold;
      if (columns->unstable_floor > 0) cols.unstable_floor = columns->unstable_floor;
    }
    *out = new gv_report{geoval::evaluate_predictions_csv(csv_path, cols), geoval::Json()};
  });
}

gv_status gv_report_load(const char* path, gv_report** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    *out = new gv_report{geoval::load_report(path), geoval::Json()};
  });
}

gv_status gv_report_write(const gv_report* report, const char* path) {
  return guard([&] {
    require(report, "report");
    require(path, "path");
    geoval::write_json(report->report, path);
  });
}

gv_status gv_report_write_model(const gv_report* report, const char* path) {
  return guard([&] {
    require(report, "report");
    require(path, "path");
    if (report->model.is_null()) throw geoval::PipelineError("this report carries no fitted models");
    geoval::write_json(report->model, path);
  });
}

gv_status gv_report_json(const gv_report* report, char** out) {
  return guard([&] {
    require(report, "report");
    require(out, "out");
    *out = nullptr;
    *out = dup(report->report.dump(2));
  });
}

gv_status gv_report_metrics_table(const gv_report* report, char** out) {
  return guard([&] {
    require(report, "report");
    require(out, "out");
    *out = nullptr;
    *out = dup(geoval::metrics_table_from_report(report->report));
  });
}

gv_status gv_report_emit_plots(const gv_report* report, const char* dir, size_t* n_written, size_t* n_skipped) {
  return guard([&] {
    require(report, "report");
    require(dir, "dir");
    const auto res = geoval::emit_plots(report->report, dir);
    const geoval::Logger log(report->report.value("run_id", ""), log_line);
    for (const auto& w : res.warnings) log.warn("plot_skipped", w);
    if (n_written) *n_written = res.written.size();
    if (n_skipped) *n_skipped = res.warnings.size();
  });
}

void gv_report_destroy(gv_report* report) { delete report; }

gv_status gv_compute_metrics(const double* y, const double* yhat, size_t n, gv_metrics* out) {
  return guard([&] {
    require(y, "y");
    require(yhat, "yhat");
    require(out, "out");
    const auto r = geoval::compute_metrics({y, n}, {yhat, n}, geoval::Transform::log1p, geoval::Transform::log1p);
    *out = gv_metrics{r.n, r.rmse, r.mae, r.ccc_log1p, r.willmott_d15, r.rpiq, r.bias, r.nrmse_minmax};
  });
}

gv_status gv_ccc(const double* y, const double* yhat, size_t n, int transform, double* out) {
  return guard([&] {
    require(y, "y");
    require(yhat, "yhat");
    require(out, "out");
    if (transform != 0 && transform != 1) throw std::invalid_argument("transform must be 0 (identity) or 1 (log1p)");
    *out = geoval::ccc({y, n}, {yhat, n}, transform == 1 ? geoval::Transform::log1p : geoval::Transform::identity);
  });
}

namespace {

gv_test_result to_c(const geoval::TestResult& r) {
  return gv_test_result{r.statistic, r.standardized, r.p_value, r.approximate ? 1 : 0, r.clamped ? 1 : 0};
}

}  // namespace

gv_status gv_ks_two_sample(const double* a, size_t na, const double* b, size_t nb, gv_test_result* out) {
  return guard([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = to_c(geoval::ks_two_sample({a, na}, {b, nb}));
  });
}

gv_status gv_ad_two_sample(const double* a, size_t na, const double* b, size_t nb, gv_test_result* out) {
  return guard([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = to_c(geoval::ad_two_sample({a, na}, {b, nb}));
  });
}

gv_status gv_conformal_quantile(const double* residuals, size_t n, double alpha, double* out) {
  return guard([&] {
    require(residuals, "residuals");
    require(out, "out");
    *out = geoval::conformal_quantile({residuals, n}, alpha);
  });
}

gv_status gv_haversine_km(double lat1, double lon1, double lat2, double lon2, double* out) {
  return guard([&] {
    require(out, "out");
    *out = geoval::haversine_km({lat1, lon1}, {lat2, lon2});
  });
}

}  // extern "C"
