#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "geoval/data.hpp"
#include "geoval/model.hpp"

namespace geoval {

/// Keeps column j iff |pearson(j, k)| <= threshold for every column k kept
/// before it (column order scan). Zero-variance columns are dropped with a
/// diagnostic. Returns kept column indices in ascending order.
std::vector<std::size_t> correlation_filter(const Matrix& x, double threshold, Diagnostics* diag = nullptr);

struct StabilityOptions {
  int iterations = 64;
  double subsample = 0.5;
  int top_k = 64;
  double pi_threshold = 0.6;
  /// Importance oracle fitted on every subsample.
  GbrtParams oracle{.n_trees = 50, .max_depth = 3, .learning_rate = 0.1, .min_samples_leaf = 5,
                    .subsample_rows = 1.0, .seed = 0};
  std::uint64_t seed = 0;

  void validate() const;
};

struct StageCounts {
  std::size_t initial = 0;
  std::size_t after_stage1 = 0;
  std::size_t after_stage2 = 0;
};

struct StabilityReport {
  /// Candidate features (stage-1 survivors), by original column index.
  std::vector<std::size_t> columns;
  std::vector<std::string> names;
  std::vector<double> pi;  // aligned with `columns`
  /// Positions into `columns`, by pi descending; ties by column index.
  std::vector<std::size_t> ranked;
  /// Original column indices with pi >= threshold, in rank order.
  std::vector<std::size_t> selected;
  StageCounts stage_counts;
  int iterations = 0;
  int top_k = 0;
  double threshold = 0.0;
  std::vector<std::string> diagnostics;
};

/// Randomized stability selection. Each iteration fits the oracle on a
/// subsample drawn without replacement and marks its top_k features by total
/// split gain (positive gain only); pi = marks / iterations. `columns` and
/// `names` label the columns of `x`.
StabilityReport stability_select(const Matrix& x, std::span<const double> y, std::span<const std::size_t> columns,
                                 std::span<const std::string> names, const StabilityOptions& opts);

struct FeatselConfig {
  bool enabled = true;
  double corr_threshold = 0.95;
  StabilityOptions stability;
};

/// Both stages on the full covariate matrix. If stage 2 keeps nothing, the
/// single best-ranked feature is kept and a diagnostic recorded.
StabilityReport select_features(const Matrix& x, std::span<const double> y, const std::vector<std::string>& names,
                                const FeatselConfig& cfg);

struct CategoryStability {
  std::vector<std::string> categories;
  std::vector<double> total;  // sum of pi
  std::vector<double> share;  // total / sum(total)
};

/// Category of a feature name: the text before its first '_'.
std::string default_category(const std::string& feature_name);

/// Sums pi by category over every feature in the report.
CategoryStability category_stability(const StabilityReport& report,
                                     const std::map<std::string, std::string>& categories);
CategoryStability category_stability(const StabilityReport& report,
                                     const std::function<std::string(const std::string&)>& categorize);

}  // namespace geoval
