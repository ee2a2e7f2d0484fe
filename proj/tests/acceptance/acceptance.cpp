// Acceptance criteria: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "geoval/conformal.hpp"
#include "geoval/featsel.hpp"
#include "geoval/metrics.hpp"
#include "geoval/model.hpp"
#include "geoval/pipeline.hpp"
#include "geoval/spatial.hpp"
#include "geoval/splitting.hpp"
#include "geoval/stats.hpp"
#include "geoval/synth.hpp"
#include "oracles.hpp"

#ifndef GEOVAL_CLI_PATH
#error "GEOVAL_CLI_PATH must name the CLI binary"
#endif

using namespace geoval;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<double> target_of(const Dataset& ds, const std::string& t = "SOC") {
  std::vector<double> y;
  for (const auto& r : ds.records) y.push_back(r.target(t).value_or(kNaN));
  return y;
}

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("geoval_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::vector<std::string>& args, const fs::path& log) {
  std::string cmd = "'" + std::string(GEOVAL_CLI_PATH) + "'";
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " > '" + log.string() + "' 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// ---- criteria ----

Outcome metric_oracle() {
  Rng rng(20240501);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.index(199);
    std::vector<double> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = std::exp(2.0 + 0.8 * rng.normal());
      p[i] = std::max(0.0, y[i] * std::exp(0.3 * rng.normal()) + 2.0 * rng.normal());
    }
    const auto ly = oracle::log1p_all(y), lp = oracle::log1p_all(p);
    const double diffs[] = {
        rmse(y, p) - oracle::rmse(y, p),
        mae(y, p) - oracle::mae(y, p),
        ccc(y, p, Transform::identity) - oracle::ccc(y, p),
        ccc(y, p, Transform::log1p) - oracle::ccc(ly, lp),
        willmott_d(y, p, 1.5) - oracle::willmott(y, p, 1.5),
        rpiq(y, p, Transform::log1p) - oracle::rpiq_log1p(y, p),
        bias(y, p) - oracle::bias(y, p),
        nrmse_minmax(y, p) - oracle::nrmse(y, p),
    };
    for (double d : diffs) worst = std::max(worst, std::isfinite(d) ? std::abs(d) : kInf);
  }
  return {worst <= 1e-10, "max |diff| " + fmt("%.3g", worst) + " <= 1e-10 over 100 instances"};
}

Outcome conformal_coverage() {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    std::vector<double> cal(2000);
    for (auto& r : cal) r = std::abs(rng.normal());
    const auto model = calibrate_global(cal, 0.10);
    std::vector<double> y(2000);
    std::vector<Interval> iv(2000);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double yhat = rng.uniform(0.0, 50.0);
      y[i] = yhat + rng.normal();
      iv[i] = predict_interval(yhat, model, "");
    }
    total += evaluate_intervals(y, iv).picp;
  }
  const double mean = total / 50;
  return {mean >= 0.885 && mean <= 0.915, "mean PICP " + fmt("%.4f", mean) + " in [0.885, 0.915]"};
}

Outcome stratified_coverage() {
  const std::vector<std::string> names = {"calm", "wild"};
  const double scale[] = {1.0, 3.0};
  double strat[2] = {0, 0}, glob[2] = {0, 0};
  const int seeds = 50;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(7000 + seed);
    std::vector<double> cal;
    std::vector<std::string> cal_s;
    for (int i = 0; i < 1000; ++i)
      for (int s = 0; s < 2; ++s) {
        cal.push_back(std::abs(scale[s] * rng.normal()));
        cal_s.push_back(names[s]);
      }
    const auto ms = calibrate_stratified(cal, cal_s, 0.10, 100);
    const auto mg = calibrate_global(cal, 0.10);
    for (int s = 0; s < 2; ++s) {
      std::vector<double> y(1000);
      std::vector<Interval> is(1000), ig(1000);
      for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = scale[s] * rng.normal();
        is[i] = predict_interval(0.0, ms, names[s]);
        ig[i] = predict_interval(0.0, mg, names[s]);
      }
      strat[s] += evaluate_intervals(y, is).picp / seeds;
      glob[s] += evaluate_intervals(y, ig).picp / seeds;
    }
  }
  bool strat_ok = true, glob_off = false;
  for (int s = 0; s < 2; ++s) {
    strat_ok = strat_ok && std::abs(strat[s] - 0.90) <= 0.02;
    glob_off = glob_off || std::abs(glob[s] - 0.90) > 0.03;
  }
  return {strat_ok && glob_off, "stratified PICP " + fmt("%.4f", strat[0]) + "/" + fmt("%.4f", strat[1]) +
                                    " (within 0.02), global " + fmt("%.4f", glob[0]) + "/" + fmt("%.4f", glob[1]) +
                                    " (one off by > 0.03)"};
}

// Independent recount of a fold plan from the blocks and sample labels.
struct PlanAudit {
  std::size_t spanning = 0;
  double max_dev = 0.0;
};

PlanAudit audit_plan(const std::vector<SpatialBlock>& blocks, const FoldPlan& plan,
                     const std::vector<std::string>& strata) {
  PlanAudit a;
  for (const auto& b : blocks) {
    std::set<int> folds;
    for (auto m : b.members) folds.insert(plan.sample_to_fold[m]);
    a.spanning += folds.size() > 1 ? 1 : 0;
  }
  std::map<std::string, double> global;
  std::size_t total = 0;
  for (const auto& b : blocks)
    for (auto m : b.members) {
      global[strata[m]] += 1;
      ++total;
    }
  for (int f = 0; f < plan.k; ++f) {
    std::map<std::string, double> local;
    double n = 0;
    for (const auto& b : blocks)
      for (auto m : b.members)
        if (plan.sample_to_fold[m] == f) {
          local[strata[m]] += 1;
          n += 1;
        }
    for (const auto& [s, c] : global) a.max_dev = std::max(a.max_dev, std::abs(local[s] / n - c / total));
  }
  return a;
}

Outcome split_integrity() {
  std::size_t spanning = 0, min_blocks = SIZE_MAX, plans = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SynthConfig sc;
    sc.n_strata = 3;
    sc.seed = seed;
    const auto data = generate(sc);
    const auto strata = data.dataset.strata();
    const auto blocks = assign_blocks(data.dataset);
    min_blocks = std::min(min_blocks, blocks.size());
    std::set<std::string> distinct(strata.begin(), strata.end());
    if (distinct.size() != 3) return {false, "generator produced " + std::to_string(distinct.size()) + " strata"};

    auto check = [&](const std::vector<SpatialBlock>& bl, const FoldPlan& plan) {
      const auto a = audit_plan(bl, plan, strata);
      spanning += a.spanning;
      worst = std::max(worst, a.max_dev);
      ++plans;
    };
    check(blocks, allocate_folds(blocks, strata, 5, seed));
    // Folds inside the calibration portion of a hold-out split, as the pipeline builds them.
    const auto split = split_calibration_test(blocks, strata, 0.2, seed);
    std::vector<SpatialBlock> cal;
    for (auto b : split.calibration_blocks) cal.push_back(blocks[b]);
    check(cal, allocate_folds(cal, strata, 5, seed));
  }
  const bool ok = spanning == 0 && worst <= 0.05 && min_blocks >= 50;
  return {ok, std::to_string(plans) + " plans, min " + std::to_string(min_blocks) + " blocks, " +
                  std::to_string(spanning) + " spanning blocks, max share deviation " + fmt("%.4f", worst) +
                  " <= 0.05"};
}

Outcome leakage_audit() {
  double min_nn = kInf;
  bool exact = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    const auto data = generate(sc);
    const auto strata = data.dataset.strata();
    const auto blocks = assign_blocks(data.dataset, {.block_km = 100.0});
    const auto plan = allocate_folds(blocks, strata, 5, seed);
    for (int f = 0; f < plan.k; ++f) {
      std::vector<const SpatialBlock*> test, train;
      for (std::size_t b = 0; b < blocks.size(); ++b) (plan.block_to_fold[b] == f ? test : train).push_back(&blocks[b]);
      const auto rep = nn_distance_report(test, train);
      std::vector<double> brute;
      for (const auto* t : test) {
        double best = kInf;
        for (const auto* r : train) best = std::min(best, haversine_km(t->centroid, r->centroid));
        brute.push_back(best);
      }
      exact = exact && rep.distances_km == brute &&
              rep.min_km == *std::min_element(brute.begin(), brute.end()) &&
              rep.median_km == oracle::quantile7(brute, 0.5) && rep.p95_km == oracle::quantile7(brute, 0.95);
      min_nn = std::min(min_nn, rep.min_km);
    }
  }
  return {min_nn >= 50.0 && exact, "min test-to-train NN " + fmt("%.1f", min_nn) + " km >= 50, brute force " +
                                       (exact ? "identical" : "MISMATCH")};
}

Outcome distribution_diagnostics() {
  SynthConfig sc;
  sc.seed = 11;
  sc.trend = SynthTrend{TrendDirection::north, 6.0};
  const auto data = generate(sc);
  const auto blocks = assign_blocks(data.dataset);
  const auto plan = allocate_folds(blocks, data.dataset.strata(), 5, 11);
  int significant = 0;
  for (const auto& d : fold_diagnostics(blocks, plan, target_of(data.dataset)))
    significant += d.ks.p_value < 0.05 ? 1 : 0;

  // Exchangeable: i.i.d. targets on the same kind of spatial layout.
  int ks_hits = 0, ad_hits = 0, tests = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    SynthConfig ex;
    ex.n_samples = 800;
    ex.seed = 500 + seed;
    const auto d = generate(ex);
    const auto bl = assign_blocks(d.dataset);
    const auto pl = allocate_folds(bl, d.dataset.strata(), 5, seed);
    Rng rng(9000 + seed);
    std::vector<double> y(d.dataset.size());
    for (auto& v : y) v = rng.normal();
    for (const auto& fd : fold_diagnostics(bl, pl, y)) {
      ks_hits += fd.ks.p_value < 0.05 ? 1 : 0;
      ad_hits += fd.ad.p_value < 0.05 ? 1 : 0;
      ++tests;
    }
  }
  const double ks_fpr = static_cast<double>(ks_hits) / tests, ad_fpr = static_cast<double>(ad_hits) / tests;
  auto in = [](double r) { return r >= 0.02 && r <= 0.09; };
  return {significant >= 4 && in(ks_fpr) && in(ad_fpr),
          "north trend: " + std::to_string(significant) + "/5 folds KS p < 0.05 (need 4); exchangeable FPR KS " +
              fmt("%.4f", ks_fpr) + ", AD " + fmt("%.4f", ad_fpr) + " in [0.02, 0.09] over " +
              std::to_string(tests) + " tests"};
}

Outcome stability_selection() {
  const std::size_t n = 200, p = 200;
  int hits = 0;
  bool monotone = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(300 + seed);
    Matrix x(n, p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p; ++j) x(i, j) = rng.normal();
    const auto planted = rng.sample_without_replacement(p, 5);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto j : planted) y[i] += x(i, j);
      y[i] += 0.5 * rng.normal();
    }
    std::vector<std::string> names;
    for (std::size_t j = 0; j < p; ++j) names.push_back("F_" + std::to_string(j));
    FeatselConfig cfg;
    cfg.stability.iterations = 64;
    cfg.stability.subsample = 0.5;  // 100 of 200 rows
    cfg.stability.top_k = 10;
    cfg.stability.seed = seed;
    const auto rep = select_features(x, y, names, cfg);
    const auto& c = rep.stage_counts;
    monotone = monotone && c.after_stage1 <= c.initial && c.after_stage2 <= c.after_stage1;
    std::set<std::size_t> top;
    for (std::size_t r = 0; r < std::min<std::size_t>(10, rep.ranked.size()); ++r) top.insert(rep.columns[rep.ranked[r]]);
    bool all = true;
    for (auto j : planted) all = all && top.count(j) == 1;
    hits += all ? 1 : 0;
  }
  return {hits >= 19 && monotone, std::to_string(hits) + "/20 seeds with all 5 planted in the top 10 (need 19), " +
                                      "stage counts " + (monotone ? "monotone" : "NOT monotone")};
}

Outcome blocked_vs_random() {
  int wins = 0;
  std::ostringstream deltas;
  for (int seed = 1; seed <= 20; ++seed) {
    auto t = ConfigTree::from_string(
        "seed: 1\n"
        "synth: {n_samples: 1000, latent_sd: 0.8, spatial_range_km: 150}\n"
        "targets: [SOC]\n"
        "test_fraction: 0\n"
        "featsel: {enabled: false}\n"
        "gbrt: {n_trees: 100}\n");
    t.set("seed", std::to_string(seed));
    const auto out = compare_cv_modes(t.resolve());
    const auto& tj = out.report["targets"][0];
    const double b = tj["blocked"]["pooled"]["rmse"].get<double>();
    const double r = tj["random"]["pooled"]["rmse"].get<double>();
    wins += b >= r ? 1 : 0;
  }
  return {wins >= 18, std::to_string(wins) + "/20 seeds with blocked RMSE >= random RMSE (need 18)"};
}

Outcome gbrt_sanity(const fs::path& scratch) {
  // Loss monotonicity over a family of fixtures.
  int fixtures = 0, monotone = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig sc;
    sc.n_samples = 400;
    sc.seed = seed;
    const auto data = generate(sc);
    const Matrix x = data.dataset.covariate_matrix();
    std::vector<double> y;
    for (double v : target_of(data.dataset)) y.push_back(std::log1p(v));
    for (int depth : {1, 3, 6}) {
      GbrtParams gp;
      gp.n_trees = 100;
      gp.max_depth = depth;
      gp.seed = seed;
      const auto m = fit_gbrt(x, y, gp);
      const auto& loss = m.train_loss();
      bool ok = true;
      for (std::size_t i = 1; i < loss.size(); ++i) ok = ok && loss[i] <= loss[i - 1];
      monotone += ok ? 1 : 0;
      ++fixtures;
    }
  }

  // Noiseless planted signal through the CLI.
  const auto cfg = scratch / "noiseless.yaml";
  std::ofstream(cfg) << "seed: 3\n"
                        "synth: {n_samples: 1500, noise_sd: 0, covariate_noise_sd: 0, latent_sd: 0}\n"
                        "targets: [SOC]\n"
                        "featsel: {top_k: 10}\n";
  const auto out = scratch / "noiseless";
  const int rc = run_cli({"run", "-c", cfg.string(), "-o", out.string(), "--no-plots"}, scratch / "noiseless.log");
  double ccc_oof = kNaN;
  bool flag = false;
  if (rc == 0) {
    const auto rep = Json::parse(read_file(out / "report.json"));
    const auto& t = rep["targets"][0];
    ccc_oof = t["metrics"]["oof"]["pooled"]["ccc_log1p"].get<double>();
    flag = t["model_summary"]["train_loss_non_increasing"].get<bool>();
  }
  monotone += flag ? 1 : 0;
  ++fixtures;
  return {monotone == fixtures && ccc_oof > 0.95,
          std::to_string(monotone) + "/" + std::to_string(fixtures) +
              " fits with non-increasing loss; noiseless CLI run exit " + std::to_string(rc) + ", OOF CCC " +
              fmt("%.4f", ccc_oof) + " > 0.95"};
}

Outcome determinism(const fs::path& scratch) {
  const auto cfg = scratch / "determinism.yaml";
  std::ofstream(cfg) << "seed: 17\n"
                        "synth: {n_samples: 800}\n"
                        "targets: [SOC]\n"
                        "featsel: {top_k: 10, iterations: 16}\n"
                        "gbrt: {n_trees: 100}\n";
  std::string reports[2], models[2];
  for (int i = 0; i < 2; ++i) {
    const auto out = scratch / ("det" + std::to_string(i));
    if (run_cli({"run", "-c", cfg.string(), "-o", out.string(), "--no-plots"}, scratch / "det.log") != 0)
      return {false, "CLI run failed: " + read_file(scratch / "det.log")};
    reports[i] = read_file(out / "report.json");
    models[i] = read_file(out / "model.json");
  }
  // timing is the last top-level key; everything before it must match byte for byte.
  auto body = [](const std::string& s) { return s.substr(0, s.find("\n  \"timing\":")); };
  const bool has_timing = reports[0].find("\n  \"timing\":") != std::string::npos;
  const bool same = has_timing && body(reports[0]) == body(reports[1]) && models[0] == models[1];
  return {same, std::string("report.json ") + (body(reports[0]) == body(reports[1]) ? "identical" : "DIFFERENT") +
                    " excluding timing (" + std::to_string(body(reports[0]).size()) + " bytes), model.json " +
                    (models[0] == models[1] ? "identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  Scratch scratch;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric-oracle-equivalence", metric_oracle},
      {"conformal-coverage", conformal_coverage},
      {"stratified-coverage", stratified_coverage},
      {"split-integrity", split_integrity},
      {"leakage-audit", leakage_audit},
      {"distribution-diagnostics", distribution_diagnostics},
      {"stability-selection", stability_selection},
      {"blocked-vs-random-cv", blocked_vs_random},
      {"gbrt-sanity", [&] { return gbrt_sanity(scratch.dir); }},
      {"determinism", [&] { return determinism(scratch.dir); }},
  };
  // Runtime limits in seconds, where the criterion pins one.
  const std::map<std::string, double> limits = {
      {"metric-oracle-equivalence", 5.0}, {"conformal-coverage", 30.0}, {"stability-selection", 120.0}};

  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (auto it = limits.find(name); it != limits.end() && secs >= it->second) {
      o.pass = false;
      o.detail += "; runtime over the " + fmt("%.0f", it->second) + " s limit";
    }
    std::printf("%s %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
