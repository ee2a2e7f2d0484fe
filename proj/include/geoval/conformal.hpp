#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoval/common.hpp"

namespace geoval {

/// Split-conformal half-width: the ceil((n+1)(1-alpha))-th smallest absolute
/// residual. Requires n >= ceil(1/alpha - 1) so that the index is at most n;
/// when the index reaches n the maximum residual is returned with a
/// diagnostic.
double conformal_quantile(std::span<const double> residuals, double alpha, Diagnostics* diag = nullptr);

/// Order-statistic index ceil((n+1)(1-alpha)), 1-based.
std::size_t conformal_rank(std::size_t n, double alpha);

struct ConformalModel {
  double alpha = 0.10;
  double global_q = 0.0;
  std::size_t global_n = 0;
  std::map<std::string, double> per_stratum_q;
  std::map<std::string, std::size_t> calibration_n;
  std::map<std::string, bool> fallback;  // true when the stratum uses global_q
  std::size_t min_stratum_count = 100;
  bool stratified = true;

  /// Half-width for a stratum. Unknown strata use global_q unless
  /// `allow_unknown` is false, in which case std::out_of_range is thrown.
  double half_width(const std::string& stratum, bool allow_unknown = true) const;
};

/// Global quantile plus per-stratum quantiles where a stratum has at least
/// `min_count` residuals.
ConformalModel calibrate_stratified(std::span<const double> residuals, std::span<const std::string> strata,
                                    double alpha = 0.10, std::size_t min_count = 100, Diagnostics* diag = nullptr);

/// Single-quantile model (stratification off).
ConformalModel calibrate_global(std::span<const double> residuals, double alpha = 0.10, Diagnostics* diag = nullptr);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool floored = false;  // lower bound clipped at 0
};

/// [yhat - q, yhat + q] with q for the stratum; `floor_zero` clips the lower
/// bound at 0 for non-negative targets.
Interval predict_interval(double yhat, const ConformalModel& model, const std::string& stratum,
                          bool floor_zero = false, bool allow_unknown = true);

struct IntervalReport {
  std::string label = "all";
  std::size_t n = 0;
  double picp = kNaN;
  double mpiw = kNaN;
  double pinaw = kNaN;
  double avg_rank = kNaN;  // mean of the MPIW and PINAW ranks (per-stratum rows)
};

/// PICP over closed intervals, mean width, and width normalised by the
/// observed range of `y`.
IntervalReport evaluate_intervals(std::span<const double> y, std::span<const Interval> intervals);

/// Pooled row followed by one row per stratum, ranked by MPIW and PINAW
/// (lower is better; ties share the average rank).
std::vector<IntervalReport> evaluate_intervals_stratified(std::span<const double> y,
                                                          std::span<const Interval> intervals,
                                                          std::span<const std::string> strata);

}  // namespace geoval
