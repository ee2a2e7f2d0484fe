// Batch command-line front end over the geoval C interface.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geoval/geoval.h"

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 success, 2 configuration, 3 data, 4 pipeline, 1 other.
int exit_code(gv_status s) {
  switch (s) {
    case GV_OK: return 0;
    case GV_ERR_CONFIG: return 2;
    case GV_ERR_DATA: return 3;
    case GV_ERR_PIPELINE:
    case GV_ERR_INVALID_ARGUMENT:
    case GV_ERR_IO: return 4;
    default: return 1;
  }
}

struct Failure {
  gv_status status;
};

void check(gv_status s, const std::string& context) {
  if (s == GV_OK) return;
  std::cerr << "geoval: " << context << ": " << gv_last_error() << '\n';
  throw Failure{s};
}

std::string take_string(char* s) {
  std::string out = s != nullptr ? s : "";
  gv_string_free(s);
  return out;
}

struct ConfigHandle {
  gv_config* ptr = nullptr;
  ~ConfigHandle() { gv_config_destroy(ptr); }
};

struct ReportHandle {
  gv_report* ptr = nullptr;
  ~ReportHandle() { gv_report_destroy(ptr); }
};

// Options shared by the configuration-driven verbs.
struct ConfigOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::string> seed;
  std::optional<std::string> k;
  std::optional<std::string> block_km;
  std::optional<std::string> alpha;
  std::optional<std::string> test_fraction;
  std::optional<std::string> input;
  std::vector<std::string> targets;
  std::string out;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "Configuration file (YAML)")->required()->check(CLI::ExistingFile);
    app->add_option("--set", sets, "Override a configuration key: key=value (repeatable)");
    app->add_option("--seed", seed, "Overrides 'seed'");
    app->add_option("-k,--folds", k, "Overrides 'k'");
    app->add_option("--block-km", block_km, "Overrides 'block_km'");
    app->add_option("--alpha", alpha, "Overrides 'alpha'");
    app->add_option("--test-fraction", test_fraction, "Overrides 'test_fraction'");
    app->add_option("--input", input, "Overrides 'input'");
    app->add_option("--target", targets, "Overrides 'targets' (repeatable)");
    app->add_option("-o,--out", out,
                    "Output directory (default: config 'output_dir', then $GEOVAL_OUTPUT_DIR, then ./geoval_out)");
  }

  void load(ConfigHandle& cfg) const {
    check(gv_config_load(config_path.c_str(), &cfg.ptr), "loading " + config_path);
    auto set = [&](const std::string& key, const std::string& value) {
      check(gv_config_set(cfg.ptr, key.c_str(), value.c_str()), "setting " + key);
    };
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        std::cerr << "geoval: --set expects key=value, got '" << kv << "'\n";
        throw Failure{GV_ERR_CONFIG};
      }
      set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) set("seed", *seed);
    if (k) set("k", *k);
    if (block_km) set("block_km", *block_km);
    if (alpha) set("alpha", *alpha);
    if (test_fraction) set("test_fraction", *test_fraction);
    if (input) set("input", *input);
    if (!targets.empty()) {
      std::string list = "[";
      for (std::size_t i = 0; i < targets.size(); ++i) list += (i ? ", " : "") + targets[i];
      set("targets", list + "]");
    }
  }

  fs::path output_dir(const ConfigHandle& cfg) const {
    if (!out.empty()) return out;
    char* v = nullptr;
    if (gv_config_get(cfg.ptr, "output_dir", &v) == GV_OK) {
      auto s = take_string(v);
      if (!s.empty()) return s;
    }
    if (const char* env = std::getenv("GEOVAL_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
    return "geoval_out";
  }
};

bool plots_enabled(const ConfigHandle& cfg) {
  char* v = nullptr;
  if (gv_config_get(cfg.ptr, "plots", &v) != GV_OK) return true;
  const auto s = take_string(v);
  return !(s == "false" || s == "no" || s == "0" || s == "off");
}

void write_report(const ReportHandle& r, const fs::path& path) {
  check(gv_report_write(r.ptr, path.string().c_str()), "writing " + path.string());
  std::cerr << "geoval: wrote " << path.string() << '\n';
}

std::string defaults_text() {
  gv_config* cfg = nullptr;
  if (gv_config_parse("seed: 0\nsynth: true\n", &cfg) != GV_OK) return {};
  char* json = nullptr;
  std::string out;
  if (gv_config_resolved_json(cfg, &json) == GV_OK) out = take_string(json);
  gv_config_destroy(cfg);
  return "Configuration keys with their defaults (shown for a synthetic run; 'seed' is mandatory,\n"
         "and exactly one of 'input' (CSV path) or 'synth' must be given):\n" +
         out + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geoval: spatially robust evaluation of geospatial regression models"};
  app.require_subcommand(1);
  app.footer(defaults_text());
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress log lines on stderr");

  ConfigOptions run_opts;
  bool no_plots = false;
  auto* run = app.add_subcommand("run", "Full pipeline: block, split, diagnose, select, fit, calibrate, evaluate");
  run_opts.attach(run);
  run->add_flag("--no-plots", no_plots, "Skip SVG figures");

  ConfigOptions synth_opts;
  std::string synth_csv;
  std::string synth_truth;
  auto* synth = app.add_subcommand("synth", "Write the configured synthetic dataset and its ground truth");
  synth_opts.attach(synth);
  synth->add_option("--csv", synth_csv, "Dataset path (default <out>/synth.csv)");
  synth->add_option("--truth", synth_truth, "Ground-truth JSON path (default <out>/synth_truth.json)");

  ConfigOptions diag_opts;
  auto* diag = app.add_subcommand("diagnose", "Blocking, fold plan and per-fold distribution diagnostics");
  diag_opts.attach(diag);

  ConfigOptions select_opts;
  auto* sel = app.add_subcommand("select", "Two-stage feature selection per target");
  select_opts.attach(sel);

  ConfigOptions cmp_opts;
  auto* cmp = app.add_subcommand("compare-cv", "Out-of-fold metrics under blocked and random folds");
  cmp_opts.attach(cmp);

  std::string eval_csv;
  std::string eval_out;
  std::string col_obs = "observed";
  std::string col_pred = "predicted";
  std::string col_target = "target";
  std::optional<std::string> col_stratum;
  std::optional<std::string> col_depth;
  std::optional<std::string> col_fold;
  std::size_t unstable_floor = 10;
  auto* eval = app.add_subcommand("evaluate", "Metrics for a CSV of observed and predicted values");
  eval->add_option("predictions", eval_csv, "CSV with observed and predicted columns")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--observed", col_obs, "Observed column")->capture_default_str();
  eval->add_option("--predicted", col_pred, "Predicted column")->capture_default_str();
  eval->add_option("--target-column", col_target, "Optional column naming the target of each row")
      ->capture_default_str();
  eval->add_option("--stratum-column", col_stratum, "Optional stratum column for per-stratum rows");
  eval->add_option("--depth-column", col_depth, "Optional depth-class column for per-depth rows");
  eval->add_option("--fold-column", col_fold, "Optional fold column for per-fold rows and fold means");
  eval->add_option("--unstable-floor", unstable_floor, "Rows with fewer samples are flagged unstable")
      ->capture_default_str();
  eval->add_option("-o,--out", eval_out, "Output directory (default $GEOVAL_OUTPUT_DIR, then ./geoval_out)");

  std::string plot_report;
  std::string plot_out;
  auto* plots = app.add_subcommand("plots", "SVG figures from an existing report");
  plots->add_option("report", plot_report, "report.json path")->required()->check(CLI::ExistingFile);
  plots->add_option("-o,--out", plot_out, "Directory for the figures (default: plots/ next to the report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (quiet) gv_set_log_enabled(0);

  try {
    if (run->parsed()) {
      ConfigHandle cfg;
      run_opts.load(cfg);
      const fs::path out = run_opts.output_dir(cfg);
      ReportHandle rep;
      check(gv_run(cfg.ptr, &rep.ptr), "run");
      write_report(rep, out / "report.json");
      check(gv_report_write_model(rep.ptr, (out / "model.json").string().c_str()), "writing model");
      std::cerr << "geoval: wrote " << (out / "model.json").string() << '\n';
      if (!no_plots && plots_enabled(cfg)) {
        std::size_t n = 0;
        check(gv_report_emit_plots(rep.ptr, (out / "plots").string().c_str(), &n, nullptr), "plots");
        std::cerr << "geoval: wrote " << n << " plots under " << (out / "plots").string() << '\n';
      }
    } else if (synth->parsed()) {
      ConfigHandle cfg;
      synth_opts.load(cfg);
      const fs::path out = synth_opts.output_dir(cfg);
      const fs::path csv = synth_csv.empty() ? out / "synth.csv" : fs::path(synth_csv);
      const fs::path truth = synth_truth.empty() ? out / "synth_truth.json" : fs::path(synth_truth);
      check(gv_synth_write(cfg.ptr, csv.string().c_str(), truth.string().c_str()), "synth");
      std::cerr << "geoval: wrote " << csv.string() << " and " << truth.string() << '\n';
    } else if (diag->parsed() || sel->parsed() || cmp->parsed()) {
      const ConfigOptions& o = diag->parsed() ? diag_opts : (sel->parsed() ? select_opts : cmp_opts);
      auto fn = diag->parsed() ? &gv_diagnose : (sel->parsed() ? &gv_select : &gv_compare_cv);
      const char* name = diag->parsed() ? "diagnose" : (sel->parsed() ? "select" : "compare_cv");
      ConfigHandle cfg;
      o.load(cfg);
      ReportHandle rep;
      check(fn(cfg.ptr, &rep.ptr), name);
      write_report(rep, o.output_dir(cfg) / (std::string(name) + ".json"));
    } else if (eval->parsed()) {
      gv_eval_columns cols{col_obs.c_str(),
                           col_pred.c_str(),
                           col_target.c_str(),
                           col_stratum ? col_stratum->c_str() : nullptr,
                           col_depth ? col_depth->c_str() : nullptr,
                           col_fold ? col_fold->c_str() : nullptr,
                           unstable_floor};
      ReportHandle rep;
      check(gv_evaluate_csv(eval_csv.c_str(), &cols, &rep.ptr), "evaluate");
      fs::path out = eval_out;
      if (out.empty()) {
        const char* env = std::getenv("GEOVAL_OUTPUT_DIR");
        out = (env != nullptr && *env != '\0') ? env : "geoval_out";
      }
      write_report(rep, out / "evaluation.json");
      char* table = nullptr;
      check(gv_report_metrics_table(rep.ptr, &table), "metrics table");
      std::cout << take_string(table);
    } else if (plots->parsed()) {
      ReportHandle rep;
      check(gv_report_load(plot_report.c_str(), &rep.ptr), "loading report");
      const fs::path out = plot_out.empty() ? fs::path(plot_report).parent_path() / "plots" : fs::path(plot_out);
      std::size_t n = 0;
      std::size_t skipped = 0;
      check(gv_report_emit_plots(rep.ptr, out.string().c_str(), &n, &skipped), "plots");
      std::cerr << "geoval: wrote " << n << " plots under " << out.string() << " (" << skipped << " skipped)\n";
    }
  } catch (const Failure& f) {
    return exit_code(f.status);
  }
  return 0;
}
