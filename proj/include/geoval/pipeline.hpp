#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoval/conformal.hpp"
#include "geoval/data.hpp"
#include "geoval/featsel.hpp"
#include "geoval/model.hpp"
#include "geoval/synth.hpp"

namespace geoval {

using Json = nlohmann::ordered_json;

/// Major.minor of the report and model file schemas. Loaders reject other majors.
inline constexpr int kSchemaMajor = 1;
inline constexpr int kSchemaMinor = 0;

enum class CalibrationMode { none, global, stratified };

struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> input;
  ColumnMapping schema;
  std::optional<SynthConfig> synth;
  std::vector<std::string> targets;  // empty: every dataset target

  double block_km = 100.0;
  bool block_random_offset = false;
  int k = 5;
  double test_fraction = 0.2;  // 0 disables the independent test split

  FeatselConfig featsel;
  GbrtParams gbrt;
  std::string transform_default = "auto";  // auto: log1p for non-negative targets
  std::map<std::string, std::string> transform;

  CalibrationMode calibration = CalibrationMode::stratified;
  std::size_t calibration_min_count = 50;
  double alpha = 0.10;
  bool conformal_stratified = true;
  std::size_t conformal_min_count = 100;

  std::size_t min_labeled = 100;
  std::size_t unstable_floor = 10;
  std::map<std::string, std::string> superclasses;

  std::string output_dir;
  bool plots = true;

  Transform transform_for(const std::string& target) const;
  bool floor_for(const std::string& target) const;
};

/// Configuration tree (YAML; JSON is accepted as a YAML subset) plus
/// dotted-key overrides. Unknown keys are rejected.
class ConfigTree {
 public:
  static ConfigTree from_file(const std::filesystem::path& path);
  static ConfigTree from_string(const std::string& text);
  ConfigTree();

  /// Sets `dotted.key` to a YAML scalar or flow value ("3", "[a, b]", "{x: 1}").
  void set(const std::string& dotted_key, const std::string& value);
  std::optional<std::string> get_scalar(const std::string& dotted_key) const;

  /// Validated, defaulted configuration. Throws ConfigError naming the field.
  RunConfig resolve() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

/// Canonical, fully defaulted echo of a configuration. Loading the echo
/// through ConfigTree::from_string reproduces the same RunConfig.
Json config_to_json(const RunConfig& cfg);

struct LogLine {
  std::string level;
  std::string event;
  std::string message;
};
using LogSink = std::function<void(const std::string& line)>;

/// Line-delimited JSON logger tagged with a run id.
class Logger {
 public:
  Logger(std::string run_id, LogSink sink) : run_id_(std::move(run_id)), sink_(std::move(sink)) {}
  void info(const std::string& event, const std::string& message) const { emit("info", event, message); }
  void warn(const std::string& event, const std::string& message) const { emit("warn", event, message); }
  const std::string& run_id() const noexcept { return run_id_; }

 private:
  void emit(const char* level, const std::string& event, const std::string& message) const;
  std::string run_id_;
  LogSink sink_;
};

/// Stable run id derived from the configuration echo.
std::string run_id_for(const Json& config_echo);

struct LoadedData {
  Dataset dataset;
  std::optional<SynthTruth> truth;
  std::vector<RowDiagnostic> rejected;
};

LoadedData load_data(const RunConfig& cfg);

struct RunOutput {
  Json report;  // report.json contents
  Json model;   // model.json contents (empty for partial verbs)
};

/// Full pipeline: ingest, block, split, diagnose, select, fit, calibrate,
/// evaluate (OOF and independent test), conformal intervals.
RunOutput run(const RunConfig& cfg, const LogSink& sink = {});

/// Blocking, splitting and fold diagnostics only.
RunOutput diagnose(const RunConfig& cfg, const LogSink& sink = {});

/// Two-stage feature selection per target on the calibration blocks.
RunOutput select(const RunConfig& cfg, const LogSink& sink = {});

/// Same model under blocked and random folds, with metric deltas.
RunOutput compare_cv_modes(const RunConfig& cfg, const LogSink& sink = {});

/// Columns of a predictions file for the evaluate verb.
struct EvaluateColumns {
  std::string observed = "observed";
  std::string predicted = "predicted";
  std::string target_label = "target";
  std::optional<std::string> stratum;
  std::optional<std::string> depth;
  std::optional<std::string> fold;
  std::size_t unstable_floor = 10;
};

/// Metrics for an arbitrary observed/predicted CSV, optionally stratified.
Json evaluate_predictions_csv(const std::filesystem::path& path, const EvaluateColumns& cols);

/// Rows of an evaluate/run report flattened into a delimited table.
std::string metrics_table_from_report(const Json& report);

/// Writes SVG figures for every target in the report. Sections that are
/// missing are skipped and reported in the returned warnings.
struct PlotResult {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
};
PlotResult emit_plots(const Json& report, const std::filesystem::path& dir);

/// Reads a report and checks its schema version.
Json load_report(const std::filesystem::path& path);
void write_json(const Json& j, const std::filesystem::path& path);

/// Rebuilds fitted target models from a model file.
struct ModelBundle {
  TargetModel model;
  std::optional<ConformalModel> conformal;
};
std::vector<ModelBundle> load_model_file(const Json& model_json);

}  // namespace geoval
