#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "geoval/common.hpp"
#include "geoval/model.hpp"

namespace geoval {

// Agreement and accuracy metrics. Inputs are aligned observation/prediction
// vectors; length mismatches and empty inputs throw std::invalid_argument.

double rmse(std::span<const double> y, std::span<const double> yhat);
double mae(std::span<const double> y, std::span<const double> yhat);

/// Mean(yhat) - mean(y); negative means underestimation.
double bias(std::span<const double> y, std::span<const double> yhat);

/// RMSE / (max(y) - min(y)). Constant y throws.
double nrmse_minmax(std::span<const double> y, std::span<const double> yhat);

/// Lin's concordance correlation coefficient with population moments,
/// computed after applying `transform` to both vectors. Both vectors
/// constant throws; one constant returns 0 with a diagnostic.
double ccc(std::span<const double> y, std::span<const double> yhat, Transform transform = Transform::identity,
           Diagnostics* diag = nullptr);

/// Willmott's index of agreement
/// d_p = 1 - sum|y - yhat|^p / sum(|yhat - ybar| + |y - ybar|)^p.
/// A zero denominator (perfect agreement on constant y) returns 1.
double willmott_d(std::span<const double> y, std::span<const double> yhat, double p = 1.5,
                  Diagnostics* diag = nullptr);

/// IQR(t(y)) / RMSE(t(y), t(yhat)). Zero RMSE returns +infinity with a diagnostic.
double rpiq(std::span<const double> y, std::span<const double> yhat, Transform transform = Transform::log1p,
            Diagnostics* diag = nullptr);

struct MetricsRow {
  std::string target;
  std::string scope;    // e.g. "oof", "test"
  std::string group;    // e.g. "pooled", "fold", "stratum", "superclass", "depth"
  std::string label;    // value of the grouping variable
  std::size_t n = 0;
  double rmse = kNaN;
  double mae = kNaN;
  double ccc_log1p = kNaN;
  double willmott_d15 = kNaN;
  double rpiq = kNaN;
  double bias = kNaN;
  double nrmse_minmax = kNaN;
  bool unstable = false;  // n below the reporting floor
  std::vector<std::string> diagnostics;
};

/// Every metric on one aligned set. Metrics whose preconditions fail are NaN
/// and the reason is recorded in `diagnostics`.
MetricsRow compute_metrics(std::span<const double> y, std::span<const double> yhat, Transform ccc_transform,
                           Transform rpiq_transform);

struct StratifiedOptions {
  std::size_t unstable_floor = 10;
  Transform ccc_transform = Transform::log1p;
  Transform rpiq_transform = Transform::log1p;
};

/// One pooled row followed by one row per distinct label (sorted).
std::vector<MetricsRow> evaluate_stratified(std::span<const double> y, std::span<const double> yhat,
                                            std::span<const std::string> labels, const std::string& group,
                                            const StratifiedOptions& opts = {});

/// Sample-count-weighted mean of stable per-stratum rows into super-classes.
/// `rows` are per-stratum rows (pooled rows are ignored); unmapped strata go
/// to a super-class named after themselves.
std::vector<MetricsRow> aggregate_superclasses(const std::vector<MetricsRow>& rows,
                                               const std::map<std::string, std::string>& superclass_of);

/// Arithmetic mean of each metric across rows (e.g. per-fold rows); n sums.
MetricsRow average_rows(const std::vector<MetricsRow>& rows, const std::string& label);

/// Delimited table (header + rows) in the column order
/// target,scope,group,label,n,RMSE,MAE,CCC_log1p,d1.5,RPIQ,Bias,NRMSE_minmax,unstable.
std::string metrics_table(const std::vector<MetricsRow>& rows, char delimiter = ',');

}  // namespace geoval
