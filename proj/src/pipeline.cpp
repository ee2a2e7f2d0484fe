#include "geoval/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>
#include <limits>

#include "geoval/conformal.hpp"
#include "geoval/metrics.hpp"
#include "geoval/spatial.hpp"
#include "geoval/splitting.hpp"
#include "geoval/stats.hpp"
#include "geoval/target_pipeline.hpp"
#include "report_json.hpp"

namespace geoval {

void Logger::emit(const char* level, const std::string& event, const std::string& message) const {
  if (!sink_) return;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char ts[32];
  std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", &tm);
  const Json j{{"ts", ts}, {"level", level}, {"run_id", run_id_}, {"event", event}, {"msg", message}};
  sink_(j.dump());
}

LoadedData load_data(const RunConfig& cfg) {
  LoadedData out;
  if (cfg.synth) {
    auto r = generate(*cfg.synth);
    out.dataset = std::move(r.dataset);
    out.truth = std::move(r.truth);
  } else if (cfg.input) {
    auto r = load_dataset(*cfg.input, cfg.schema);
    out.dataset = std::move(r.dataset);
    out.rejected = std::move(r.rejected);
  } else {
    throw ConfigError("exactly one of 'input' or 'synth' must be given");
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Context {
  RunConfig cfg;
  Json echo;
  Logger log{"", {}};
  LoadedData data;
  Matrix x;
  std::vector<std::string> strata;
  std::vector<std::string> targets;
  BlockingOptions blocking;
  std::vector<SpatialBlock> blocks;
  bool has_test = false;
  CalibrationTestSplit split;
  std::vector<SpatialBlock> cal_blocks;
  std::vector<char> in_calibration;  // per sample
  std::vector<std::size_t> cal_samples;
  std::vector<std::size_t> test_samples;
  FoldPlan plan;
  std::map<std::string, std::string> superclass_of;
  Json timing = Json::object();
};

Context prepare(const RunConfig& cfg, const LogSink& sink, bool use_test_split) {
  Context ctx;
  ctx.cfg = cfg;
  ctx.echo = config_to_json(cfg);
  ctx.log = Logger(run_id_for(ctx.echo), sink);
  auto t0 = Clock::now();

  ctx.data = load_data(cfg);
  const auto& ds = ctx.data.dataset;
  ctx.log.info("data_loaded", std::to_string(ds.size()) + " samples, " + std::to_string(ds.width()) + " covariates");
  for (const auto& r : ctx.data.rejected)
    ctx.log.warn("row_rejected", "row " + std::to_string(r.row) + " column '" + r.column + "': " + r.message);

  ctx.targets = cfg.targets.empty() ? ds.target_names : cfg.targets;
  for (const auto& t : ctx.targets)
    if (std::find(ds.target_names.begin(), ds.target_names.end(), t) == ds.target_names.end())
      throw ConfigError("targets: '" + t + "' is not a target column of the dataset");
  ctx.x = ds.covariate_matrix();
  ctx.strata = ds.strata();

  ctx.blocking.block_km = cfg.block_km;
  if (cfg.block_random_offset) ctx.blocking = seeded_offset(cfg.block_km, derive_seed(cfg.seed, 11));
  ctx.blocks = assign_blocks(ds, ctx.blocking);
  ctx.log.info("blocked", std::to_string(ctx.blocks.size()) + " spatial blocks");

  ctx.in_calibration.assign(ds.size(), 1);
  std::vector<std::size_t> cal_positions;
  if (use_test_split && cfg.test_fraction > 0.0) {
    try {
      ctx.split = split_calibration_test(ctx.blocks, ctx.strata, cfg.test_fraction, derive_seed(cfg.seed, 12));
    } catch (const std::invalid_argument& e) {
      throw PipelineError(std::string("calibration/test split failed: ") + e.what());
    }
    ctx.has_test = !ctx.split.test_blocks.empty();
    cal_positions = ctx.split.calibration_blocks;
    for (auto i : ctx.split.test_samples) ctx.in_calibration[i] = 0;
    ctx.test_samples = ctx.split.test_samples;
  } else {
    for (std::size_t b = 0; b < ctx.blocks.size(); ++b) cal_positions.push_back(b);
  }
  for (auto b : cal_positions) ctx.cal_blocks.push_back(ctx.blocks[b]);
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ctx.in_calibration[i]) ctx.cal_samples.push_back(i);

  try {
    ctx.plan = allocate_folds(ctx.cal_blocks, ctx.strata, cfg.k, derive_seed(cfg.seed, 13));
  } catch (const std::invalid_argument& e) {
    throw PipelineError(std::string("fold allocation failed: ") + e.what());
  }
  for (const auto& d : ctx.plan.diagnostics) ctx.log.warn("fold_plan", d);

  ctx.superclass_of = cfg.superclasses;
  if (ctx.superclass_of.empty() && ctx.data.truth) ctx.superclass_of = ctx.data.truth->superclass_of;
  ctx.timing["prepare_seconds"] = seconds_since(t0);
  return ctx;
}

std::vector<double> target_vector(const Dataset& ds, const std::string& target) {
  std::vector<double> y(ds.size(), kNaN);
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (auto v = ds.records[i].target(target)) y[i] = *v;
  return y;
}

Json header(const Context& ctx, const char* kind) {
  return Json{{"schema_version", schema_version_string()},
              {"kind", kind},
              {"run_id", ctx.log.run_id()},
              {"config", ctx.echo}};
}

Json dataset_json(const Context& ctx) {
  const auto& ds = ctx.data.dataset;
  Json rejected = Json::array();
  for (const auto& r : ctx.data.rejected)
    rejected.push_back({{"row", r.row}, {"column", r.column}, {"message", r.message}});
  Json summary = Json::array();
  for (const auto& s : summarize(ds)) {
    auto vs = [](const ValueSummary& v) {
      return Json{{"count", v.count}, {"median", v.median}, {"iqr", v.iqr}};
    };
    Json by = Json::object();
    for (const auto& [k, v] : s.by_stratum) by[k] = vs(v);
    summary.push_back({{"target", s.target}, {"overall", vs(s.overall)}, {"by_stratum", by}});
  }
  Json j{{"n_samples", ds.size()},
         {"n_features", ds.width()},
         {"features", ds.feature_names},
         {"targets", ds.target_names},
         {"rejected_rows", rejected},
         {"summary", summary}};
  if (ctx.data.truth) j["synthetic_truth"] = to_json(*ctx.data.truth);
  return j;
}

Json blocks_json(const Context& ctx) {
  std::vector<double> sizes;
  for (const auto& b : ctx.blocks) sizes.push_back(static_cast<double>(b.size()));
  return Json{{"block_km", ctx.blocking.block_km},
              {"offset_km", {ctx.blocking.offset_x_km, ctx.blocking.offset_y_km}},
              {"n_blocks", ctx.blocks.size()},
              {"size_min", *std::min_element(sizes.begin(), sizes.end())},
              {"size_median", median(sizes)},
              {"size_max", *std::max_element(sizes.begin(), sizes.end())}};
}

Json split_json(const Context& ctx) {
  if (!ctx.has_test) return Json{{"test_fraction", 0.0}, {"n_calibration_samples", ctx.cal_samples.size()}};
  std::vector<const SpatialBlock*> test;
  std::vector<const SpatialBlock*> cal;
  Json test_ids = Json::array();
  for (auto b : ctx.split.test_blocks) {
    test.push_back(&ctx.blocks[b]);
    test_ids.push_back(ctx.blocks[b].block_id);
  }
  for (const auto& b : ctx.cal_blocks) cal.push_back(&b);
  const auto nn = nn_distance_report(test, cal, NNMode::centroid);
  return Json{{"test_fraction", ctx.cfg.test_fraction},
              {"n_calibration_blocks", ctx.split.calibration_blocks.size()},
              {"n_test_blocks", ctx.split.test_blocks.size()},
              {"n_calibration_samples", ctx.cal_samples.size()},
              {"n_test_samples", ctx.test_samples.size()},
              {"strata", ctx.split.strata},
              {"test_share_by_stratum", ctx.split.test_share_by_stratum},
              {"test_block_ids", test_ids},
              {"test_nn_distance", to_json(nn, true)}};
}

Json fold_diagnostics_json(const Context& ctx, const std::vector<double>& y) {
  std::vector<double> yc = y;
  for (std::size_t i = 0; i < yc.size(); ++i)
    if (!ctx.in_calibration[i]) yc[i] = kNaN;
  try {
    const auto diags = fold_diagnostics(ctx.cal_blocks, ctx.plan, yc);
    Json folds = Json::array();
    int sig_ks = 0;
    int sig_ad = 0;
    for (const auto& d : diags) {
      folds.push_back(to_json(d));
      sig_ks += d.ks.p_value < 0.05;
      sig_ad += d.ad.p_value < 0.05;
    }
    return Json{{"folds", folds}, {"significant_ks", sig_ks}, {"significant_ad", sig_ad}};
  } catch (const std::exception& e) {
    ctx.log.warn("fold_diagnostics", e.what());
    return Json{{"error", e.what()}};
  }
}

// Skeleton carrying the feature subset and transform of a fitted model.
TargetModel skeleton_of(const TargetModel& m) {
  TargetModel s;
  s.target = m.target;
  s.transform = m.transform;
  s.floor_zero = m.floor_zero;
  s.feature_names = m.feature_names;
  s.feature_indices = m.feature_indices;
  s.input_width = m.input_width;
  return s;
}

Trainer make_trainer(const TargetModel& proto, const GbrtParams& params) {
  auto skel = std::make_shared<TargetModel>(skeleton_of(proto));
  return [skel, params](const Matrix& x, std::span<const double> y, int fold) -> std::unique_ptr<Predictor> {
    auto m = std::make_unique<TargetModel>(*skel);
    std::vector<double> z;
    z.reserve(y.size());
    for (double v : y) z.push_back(m->forward(v));
    GbrtParams p = params;
    p.seed = derive_seed(params.seed, 1000 + static_cast<std::uint64_t>(fold + 1));
    m->gbrt = fit_gbrt(x.select_cols(m->feature_indices), z, p);
    return m;
  };
}

TargetFitOptions fit_options(const RunConfig& cfg, const std::string& target) {
  TargetFitOptions o;
  o.featsel = cfg.featsel;
  o.gbrt = cfg.gbrt;
  o.transform = cfg.transform_for(target);
  o.floor_zero = cfg.floor_for(target);
  o.min_labeled = cfg.min_labeled;
  return o;
}

std::size_t calibration_min_count(const RunConfig& cfg) {
  return cfg.calibration == CalibrationMode::global ? std::numeric_limits<std::size_t>::max()
                                                    : cfg.calibration_min_count;
}

ConformalModel calibrate(const RunConfig& cfg, std::span<const double> residuals,
                         std::span<const std::string> strata, Diagnostics* diag) {
  try {
    if (cfg.conformal_stratified)
      return calibrate_stratified(residuals, strata, cfg.alpha, cfg.conformal_min_count, diag);
    return calibrate_global(residuals, cfg.alpha, diag);
  } catch (const std::invalid_argument& e) {
    throw PipelineError(std::string("conformal calibration failed: ") + e.what());
  }
}

// Aligned evaluation set for one scenario.
struct EvalSet {
  std::vector<std::size_t> rows;
  std::vector<double> obs;
  std::vector<double> pred;
  std::vector<double> pred_raw;
  std::vector<std::string> strata;
  std::vector<std::string> depths;
  std::vector<std::string> folds;
  std::vector<Interval> intervals;
};

std::vector<MetricsRow> tag(std::vector<MetricsRow> rows, const std::string& target, const std::string& scope) {
  for (auto& r : rows) {
    r.target = target;
    r.scope = scope;
  }
  return rows;
}

Json metrics_block(const Context& ctx, const EvalSet& e, const std::string& target, const std::string& scope,
                   bool with_folds) {
  StratifiedOptions so;
  so.unstable_floor = ctx.cfg.unstable_floor;
  auto by_stratum = tag(evaluate_stratified(e.obs, e.pred, e.strata, "stratum", so), target, scope);
  auto by_depth = tag(evaluate_stratified(e.obs, e.pred, e.depths, "depth", so), target, scope);
  std::vector<MetricsRow> stratum_rows(by_stratum.begin() + 1, by_stratum.end());
  Json j;
  j["pooled"] = to_json(by_stratum.front());
  if (with_folds) {
    auto by_fold = tag(evaluate_stratified(e.obs, e.pred, e.folds, "fold", so), target, scope);
    std::vector<MetricsRow> fold_rows(by_fold.begin() + 1, by_fold.end());
    j["per_fold"] = to_json(fold_rows);
    j["fold_mean"] = to_json(average_rows(fold_rows, "mean"));
  }
  j["by_stratum"] = to_json(stratum_rows);
  j["by_superclass"] = to_json(aggregate_superclasses(stratum_rows, ctx.superclass_of));
  j["by_depth"] = to_json(std::vector<MetricsRow>(by_depth.begin() + 1, by_depth.end()));
  StratifiedOptions raw = so;
  auto uncal = compute_metrics(e.obs, e.pred_raw, raw.ccc_transform, raw.rpiq_transform);
  uncal.target = target;
  uncal.scope = scope;
  uncal.group = "pooled_uncalibrated";
  uncal.label = "all";
  j["pooled_uncalibrated"] = to_json(uncal);
  return j;
}

Json interval_block(const EvalSet& e) {
  Json rows = Json::array();
  for (const auto& r : evaluate_intervals_stratified(e.obs, e.intervals, e.strata)) rows.push_back(to_json(r));
  std::size_t floored = 0;
  for (const auto& iv : e.intervals) floored += iv.floored;
  return Json{{"rows", rows}, {"floored_lower_bounds", floored}};
}

struct TargetOutcome {
  Json report;
  Json model;
};

TargetOutcome run_target(Context& ctx, const std::string& target) {
  const auto& cfg = ctx.cfg;
  const auto& ds = ctx.data.dataset;
  Json& timing = ctx.timing[target] = Json::object();
  const auto y = target_vector(ds, target);
  std::vector<double> y_cal = y;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!ctx.in_calibration[i]) y_cal[i] = kNaN;
  Diagnostics diag;

  auto t0 = Clock::now();
  Json fold_diag = fold_diagnostics_json(ctx, y);
  timing["fold_diagnostics_seconds"] = seconds_since(t0);

  t0 = Clock::now();
  TargetFit fit = fit_target_pipeline(ds, target, fit_options(cfg, target), ctx.cal_samples);
  for (const auto& m : fit.diagnostics.messages) diag.add(m);
  timing["select_fit_seconds"] = seconds_since(t0);
  ctx.log.info("model_fitted", target + ": " + std::to_string(fit.model.feature_names.size()) + " features selected");

  t0 = Clock::now();
  const auto oof_raw = oof_predictions(ctx.plan, make_trainer(fit.model, cfg.gbrt), ctx.x, y_cal);
  timing["oof_seconds"] = seconds_since(t0);

  // OOF evaluation set (labeled calibration samples).
  EvalSet oof;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::isnan(y_cal[i])) continue;
    oof.rows.push_back(i);
    oof.obs.push_back(y[i]);
    oof.pred_raw.push_back(oof_raw[i]);
    oof.strata.push_back(ctx.strata[i]);
    oof.depths.emplace_back(to_token(ds.records[i].depth));
    oof.folds.push_back(std::to_string(ctx.plan.sample_to_fold[i]));
  }
  const std::size_t n_oof = oof.rows.size();
  oof.pred = oof.pred_raw;
  auto fold_of = [&](std::size_t r) { return ctx.plan.sample_to_fold[oof.rows[r]]; };

  // Calibration: cross-fitted over folds for OOF, full fit for the test set.
  Json calibration = Json{{"mode", cfg.calibration == CalibrationMode::none     ? "none"
                                   : cfg.calibration == CalibrationMode::global ? "global"
                                                                                : "stratified"}};
  if (cfg.calibration != CalibrationMode::none) {
    for (int f = 0; f < ctx.plan.k; ++f) {
      std::vector<double> p;
      std::vector<double> o;
      std::vector<std::string> s;
      for (std::size_t r = 0; r < n_oof; ++r) {
        if (fold_of(r) == f) continue;
        p.push_back(oof.pred_raw[r]);
        o.push_back(oof.obs[r]);
        s.push_back(oof.strata[r]);
      }
      const auto cal = fit_stratum_calibration(p, o, s, calibration_min_count(cfg));
      for (std::size_t r = 0; r < n_oof; ++r) {
        if (fold_of(r) != f) continue;
        double v = cal.apply(oof.pred_raw[r], oof.strata[r]);
        if (fit.model.floor_zero) v = std::max(0.0, v);
        oof.pred[r] = v;
      }
    }
    fit.model.calibrator = fit_stratum_calibration(oof.pred_raw, oof.obs, oof.strata, calibration_min_count(cfg), &diag);
    calibration["model"] = to_json(*fit.model.calibrator);
  }

  // Conformal intervals: residuals of the calibrated OOF predictions.
  std::vector<double> resid(n_oof);
  for (std::size_t r = 0; r < n_oof; ++r) resid[r] = std::abs(oof.obs[r] - oof.pred[r]);
  oof.intervals.resize(n_oof);
  for (int f = 0; f < ctx.plan.k; ++f) {
    std::vector<double> rs;
    std::vector<std::string> ss;
    for (std::size_t r = 0; r < n_oof; ++r) {
      if (fold_of(r) == f) continue;
      rs.push_back(resid[r]);
      ss.push_back(oof.strata[r]);
    }
    const auto cm = calibrate(cfg, rs, ss, nullptr);
    for (std::size_t r = 0; r < n_oof; ++r)
      if (fold_of(r) == f) oof.intervals[r] = predict_interval(oof.pred[r], cm, oof.strata[r], fit.model.floor_zero);
  }
  const ConformalModel conformal = calibrate(cfg, resid, oof.strata, &diag);

  Json metrics;
  metrics["oof"] = metrics_block(ctx, oof, target, "oof", true);
  Json intervals;
  intervals["mode"] = cfg.conformal_stratified ? "stratified" : "global";
  intervals["alpha"] = cfg.alpha;
  intervals["oof"] = interval_block(oof);

  // Independent test scenario.
  EvalSet test;
  if (ctx.has_test) {
    for (auto i : ctx.test_samples) {
      if (std::isnan(y[i])) continue;
      test.rows.push_back(i);
      test.obs.push_back(y[i]);
      test.pred_raw.push_back(fit.model.predict(ctx.x.row(i)));
      test.pred.push_back(fit.model.predict_calibrated(ctx.x.row(i), ctx.strata[i]));
      test.strata.push_back(ctx.strata[i]);
      test.depths.emplace_back(to_token(ds.records[i].depth));
      test.folds.emplace_back("test");
      test.intervals.push_back(predict_interval(test.pred.back(), conformal, ctx.strata[i], fit.model.floor_zero));
    }
    if (test.rows.size() >= 2) {
      metrics["test"] = metrics_block(ctx, test, target, "test", false);
      intervals["test"] = interval_block(test);
    } else {
      diag.add("independent test set has fewer than 2 labeled samples; test metrics skipped");
    }
  }
  intervals["model"] = to_json(conformal);

  Json predictions = Json::array();
  auto emit = [&](const EvalSet& e, const char* set) {
    for (std::size_t r = 0; r < e.rows.size(); ++r) {
      const auto i = e.rows[r];
      predictions.push_back({{"id", ds.records[i].id},
                             {"set", set},
                             {"stratum", e.strata[r]},
                             {"depth", e.depths[r]},
                             {"fold", ctx.plan.sample_to_fold[i]},
                             {"observed", e.obs[r]},
                             {"predicted", e.pred[r]},
                             {"predicted_uncalibrated", e.pred_raw[r]},
                             {"lower", e.intervals[r].lower},
                             {"upper", e.intervals[r].upper}});
    }
  };
  emit(oof, "oof");
  emit(test, "test");

  const auto& loss = fit.model.gbrt.train_loss();
  bool monotone = true;
  for (std::size_t t = 1; t < loss.size(); ++t) monotone = monotone && loss[t] <= loss[t - 1];

  for (const auto& m : diag.messages) ctx.log.warn("diagnostic", target + ": " + m);
  ctx.log.info("target_done", target + ": OOF pooled n=" + std::to_string(n_oof));

  TargetOutcome out;
  Json& r = out.report;
  r["target"] = target;
  r["transform"] = std::string(to_string(fit.model.transform));
  r["floor_zero"] = fit.model.floor_zero;
  r["n_labeled_calibration"] = n_oof;
  r["n_labeled_test"] = test.rows.size();
  r["fold_diagnostics"] = fold_diag;
  r["stability"] = to_json(fit.stability);
  r["category_stability"] = to_json(category_stability(fit.stability, default_category));
  r["model_summary"] = {{"features", fit.model.feature_names},
                        {"n_trees", fit.model.gbrt.trees().size()},
                        {"train_loss_initial", loss.empty() ? kNaN : loss.front()},
                        {"train_loss_final", loss.empty() ? kNaN : loss.back()},
                        {"train_loss_non_increasing", monotone}};
  r["calibration"] = calibration;
  r["metrics"] = metrics;
  r["intervals"] = intervals;
  r["diagnostics"] = diag.messages;
  r["predictions"] = predictions;

  out.model = to_json(fit.model);
  out.model["conformal"] = to_json(conformal);
  return out;
}

Json finish_timing(Context& ctx, Clock::time_point t0) {
  ctx.timing["total_seconds"] = seconds_since(t0);
  return ctx.timing;
}

// Error kinds raised inside numerical code surface as pipeline failures.
template <typename F>
RunOutput guarded(F&& body) {
  try {
    return body();
  } catch (const Error&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw PipelineError(e.what());
  } catch (const std::out_of_range& e) {
    throw PipelineError(e.what());
  }
}

}  // namespace

RunOutput run(const RunConfig& cfg, const LogSink& sink) {
  return guarded([&] {
    const auto t0 = Clock::now();
    Context ctx = prepare(cfg, sink, true);
    RunOutput out;
    out.report = header(ctx, "run");
    out.report["dataset"] = dataset_json(ctx);
    out.report["blocks"] = blocks_json(ctx);
    out.report["split"] = split_json(ctx);
    out.report["fold_plan"] = to_json(ctx.plan, ctx.cal_blocks);
    out.model = Json{{"format", "geoval-model"},
                     {"schema_version", schema_version_string()},
                     {"run_id", ctx.log.run_id()},
                     {"features", ctx.data.dataset.feature_names},
                     {"targets", Json::array()}};
    Json targets = Json::array();
    for (const auto& t : ctx.targets) {
      auto o = run_target(ctx, t);
      targets.push_back(std::move(o.report));
      out.model["targets"].push_back(std::move(o.model));
    }
    out.report["targets"] = targets;
    out.report["timing"] = finish_timing(ctx, t0);
    ctx.log.info("run_done", "report assembled");
    return out;
  });
}

RunOutput diagnose(const RunConfig& cfg, const LogSink& sink) {
  return guarded([&] {
    const auto t0 = Clock::now();
    Context ctx = prepare(cfg, sink, true);
    RunOutput out;
    out.report = header(ctx, "diagnose");
    out.report["dataset"] = dataset_json(ctx);
    out.report["blocks"] = blocks_json(ctx);
    out.report["split"] = split_json(ctx);
    out.report["fold_plan"] = to_json(ctx.plan, ctx.cal_blocks);
    Json targets = Json::array();
    for (const auto& t : ctx.targets)
      targets.push_back({{"target", t}, {"fold_diagnostics", fold_diagnostics_json(ctx, target_vector(ctx.data.dataset, t))}});
    out.report["targets"] = targets;
    out.report["timing"] = finish_timing(ctx, t0);
    return out;
  });
}

RunOutput select(const RunConfig& cfg, const LogSink& sink) {
  return guarded([&] {
    const auto t0 = Clock::now();
    Context ctx = prepare(cfg, sink, true);
    const auto& ds = ctx.data.dataset;
    RunOutput out;
    out.report = header(ctx, "select");
    Json targets = Json::array();
    for (const auto& t : ctx.targets) {
      const auto opts = fit_options(cfg, t);
      TargetModel tm;
      tm.transform = opts.transform;
      std::vector<std::size_t> rows;
      std::vector<double> z;
      for (auto i : ctx.cal_samples) {
        if (auto v = ds.records[i].target(t)) {
          rows.push_back(i);
          z.push_back(tm.forward(*v));
        }
      }
      if (rows.size() < cfg.min_labeled)
        throw DataError("target '" + t + "' has " + std::to_string(rows.size()) +
                        " labeled samples, fewer than the required " + std::to_string(cfg.min_labeled));
      const auto rep = select_features(ctx.x.select_rows(rows), z, ds.feature_names, cfg.featsel);
      targets.push_back({{"target", t},
                         {"transform", std::string(to_string(opts.transform))},
                         {"n_rows", rows.size()},
                         {"stability", to_json(rep)},
                         {"category_stability", to_json(category_stability(rep, default_category))}});
    }
    out.report["targets"] = targets;
    out.report["timing"] = finish_timing(ctx, t0);
    return out;
  });
}

RunOutput compare_cv_modes(const RunConfig& cfg, const LogSink& sink) {
  return guarded([&] {
    const auto t0 = Clock::now();
    Context ctx = prepare(cfg, sink, false);
    const auto& ds = ctx.data.dataset;
    FoldPlan random_plan = allocate_random_folds(ctx.strata, cfg.k, derive_seed(cfg.seed, 14));
    RunOutput out;
    out.report = header(ctx, "compare-cv");
    out.report["modes"] = {"blocked", "random"};
    out.report["blocks"] = blocks_json(ctx);
    out.report["fold_plans"] = {{"blocked", to_json(ctx.plan, ctx.cal_blocks)},
                                {"random",
                                 {{"k", random_plan.k},
                                  {"fold_sizes", random_plan.fold_sizes},
                                  {"max_share_deviation", random_plan.max_share_deviation()}}}};
    StratifiedOptions so;
    so.unstable_floor = cfg.unstable_floor;
    Json targets = Json::array();
    for (const auto& t : ctx.targets) {
      const auto y = target_vector(ds, t);
      TargetFit fit = fit_target_pipeline(ds, t, fit_options(cfg, t), ctx.cal_samples);
      const Trainer trainer = make_trainer(fit.model, cfg.gbrt);
      Json tj{{"target", t}, {"features", fit.model.feature_names}};
      std::map<std::string, MetricsRow> pooled;
      for (const auto& [mode, plan] : {std::pair<const char*, const FoldPlan*>{"blocked", &ctx.plan},
                                       std::pair<const char*, const FoldPlan*>{"random", &random_plan}}) {
        const auto pred = oof_predictions(*plan, trainer, ctx.x, y);
        std::vector<double> o;
        std::vector<double> p;
        std::vector<std::string> folds;
        for (std::size_t i = 0; i < y.size(); ++i) {
          if (std::isnan(y[i])) continue;
          o.push_back(y[i]);
          p.push_back(pred[i]);
          folds.push_back(std::to_string(plan->sample_to_fold[i]));
        }
        auto rows = tag(evaluate_stratified(o, p, folds, "fold", so), t, mode);
        std::vector<MetricsRow> fold_rows(rows.begin() + 1, rows.end());
        pooled[mode] = rows.front();
        tj[mode] = {{"mode", mode},
                    {"pooled", to_json(rows.front())},
                    {"fold_mean", to_json(average_rows(fold_rows, "mean"))},
                    {"per_fold", to_json(fold_rows)}};
      }
      const auto& b = pooled["blocked"];
      const auto& r = pooled["random"];
      tj["delta_blocked_minus_random"] = {{"rmse", b.rmse - r.rmse},
                                          {"mae", b.mae - r.mae},
                                          {"ccc_log1p", b.ccc_log1p - r.ccc_log1p},
                                          {"willmott_d15", b.willmott_d15 - r.willmott_d15},
                                          {"rpiq", b.rpiq - r.rpiq},
                                          {"bias", b.bias - r.bias},
                                          {"nrmse_minmax", b.nrmse_minmax - r.nrmse_minmax}};
      ctx.log.info("compare_cv", t + ": blocked RMSE " + format_double(b.rmse) + ", random RMSE " +
                                     format_double(r.rmse));
      targets.push_back(std::move(tj));
    }
    out.report["targets"] = targets;
    out.report["timing"] = finish_timing(ctx, t0);
    return out;
  });
}

Json evaluate_predictions_csv(const std::filesystem::path& path, const EvaluateColumns& cols) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw DataError("'" + path.string() + "' is empty");
  const auto& head = rows.front();
  auto find = [&](const std::string& name, bool required) -> std::ptrdiff_t {
    auto it = std::find(head.begin(), head.end(), name);
    if (it == head.end()) {
      if (required) throw DataError("column '" + name + "' not found in '" + path.string() + "'");
      return -1;
    }
    return it - head.begin();
  };
  const auto c_obs = find(cols.observed, true);
  const auto c_pred = find(cols.predicted, true);
  const auto c_target = find(cols.target_label, false);
  const auto c_stratum = cols.stratum ? find(*cols.stratum, true) : -1;
  const auto c_depth = cols.depth ? find(*cols.depth, true) : -1;
  const auto c_fold = cols.fold ? find(*cols.fold, true) : -1;

  struct Group {
    std::vector<double> o, p;
    std::vector<std::string> s, d, f;
  };
  std::map<std::string, Group> groups;
  std::size_t skipped = 0;
  auto parse = [](const std::string& s, double& v) {
    try {
      std::size_t pos = 0;
      v = std::stod(s, &pos);
      return pos == s.size() && std::isfinite(v);
    } catch (const std::exception&) {
      return false;
    }
  };
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != head.size()) throw DataError("row " + std::to_string(r) + " has the wrong number of fields");
    double o = 0.0;
    double p = 0.0;
    if (!parse(row[static_cast<std::size_t>(c_obs)], o) || !parse(row[static_cast<std::size_t>(c_pred)], p)) {
      ++skipped;
      continue;
    }
    auto& g = groups[c_target >= 0 ? row[static_cast<std::size_t>(c_target)] : std::string("target")];
    g.o.push_back(o);
    g.p.push_back(p);
    g.s.push_back(c_stratum >= 0 ? row[static_cast<std::size_t>(c_stratum)] : "");
    g.d.push_back(c_depth >= 0 ? row[static_cast<std::size_t>(c_depth)] : "");
    g.f.push_back(c_fold >= 0 ? row[static_cast<std::size_t>(c_fold)] : "");
  }
  if (groups.empty()) throw DataError("no rows with numeric observed and predicted values");

  StratifiedOptions so;
  so.unstable_floor = cols.unstable_floor;
  Json targets = Json::array();
  for (const auto& [name, g] : groups) {
    Json tj{{"target", name}};
    auto pooled = compute_metrics(g.o, g.p, so.ccc_transform, so.rpiq_transform);
    pooled.target = name;
    pooled.scope = "evaluate";
    pooled.group = "pooled";
    pooled.label = "all";
    pooled.unstable = pooled.n < so.unstable_floor;
    tj["pooled"] = to_json(pooled);
    auto grouped = [&](const std::vector<std::string>& labels, const char* group) {
      auto rows = tag(evaluate_stratified(g.o, g.p, labels, group, so), name, "evaluate");
      return std::vector<MetricsRow>(rows.begin() + 1, rows.end());
    };
    if (c_stratum >= 0) tj["by_stratum"] = to_json(grouped(g.s, "stratum"));
    if (c_depth >= 0) tj["by_depth"] = to_json(grouped(g.d, "depth"));
    if (c_fold >= 0) {
      const auto f = grouped(g.f, "fold");
      tj["per_fold"] = to_json(f);
      tj["fold_mean"] = to_json(average_rows(f, "mean"));
    }
    targets.push_back(std::move(tj));
  }
  return Json{{"schema_version", schema_version_string()},
              {"kind", "evaluate"},
              {"source", path.filename().string()},
              {"skipped_rows", skipped},
              {"targets", targets}};
}

}  // namespace geoval
