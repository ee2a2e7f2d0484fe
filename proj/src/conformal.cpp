#include "geoval/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace geoval {

std::size_t conformal_rank(std::size_t n, double alpha) {
  const double level = (static_cast<double>(n) + 1.0) * (1.0 - alpha);
  // Guard against representation error such as 100 * 0.9 = 90.00000000000001.
  return static_cast<std::size_t>(std::ceil(level - 1e-9));
}

double conformal_quantile(std::span<const double> residuals, double alpha, Diagnostics* diag) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  const auto min_n = static_cast<std::size_t>(std::ceil(1.0 / alpha - 1.0 - 1e-9));
  if (residuals.size() < std::max<std::size_t>(1, min_n))
    throw std::invalid_argument("conformal calibration needs at least " + std::to_string(std::max<std::size_t>(1, min_n)) +
                                " residuals at alpha=" + std::to_string(alpha) + ", got " +
                                std::to_string(residuals.size()));
  std::vector<double> r(residuals.begin(), residuals.end());
  for (double v : r)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("residuals must be finite and non-negative");
  std::sort(r.begin(), r.end());
  const std::size_t k = conformal_rank(r.size(), alpha);
  if (k >= r.size()) {
    note(diag, "conformal rank " + std::to_string(k) + " reaches n=" + std::to_string(r.size()) +
                   "; using the maximum residual");
    return r.back();
  }
  return r[std::max<std::size_t>(k, 1) - 1];
}

double ConformalModel::half_width(const std::string& stratum, bool allow_unknown) const {
  if (!stratified) return global_q;
  auto it = per_stratum_q.find(stratum);
  if (it != per_stratum_q.end()) return it->second;
  if (!allow_unknown) throw std::out_of_range("no conformal quantile for stratum '" + stratum + "'");
  return global_q;
}

ConformalModel calibrate_global(std::span<const double> residuals, double alpha, Diagnostics* diag) {
  ConformalModel m;
  m.alpha = alpha;
  m.stratified = false;
  m.global_q = conformal_quantile(residuals, alpha, diag);
  m.global_n = residuals.size();
  return m;
}

ConformalModel calibrate_stratified(std::span<const double> residuals, std::span<const std::string> strata,
                                    double alpha, std::size_t min_count, Diagnostics* diag) {
  if (residuals.size() != strata.size()) throw std::invalid_argument("residuals and strata must be aligned");
  ConformalModel m = calibrate_global(residuals, alpha, diag);
  m.stratified = true;
  m.min_stratum_count = min_count;
  std::map<std::string, std::vector<double>> groups;
  for (std::size_t i = 0; i < residuals.size(); ++i) groups[strata[i]].push_back(residuals[i]);
  for (const auto& [s, r] : groups) {
    m.calibration_n[s] = r.size();
    if (r.size() < min_count) {
      m.per_stratum_q[s] = m.global_q;
      m.fallback[s] = true;
      continue;
    }
    m.per_stratum_q[s] = conformal_quantile(r, alpha, diag);
    m.fallback[s] = false;
  }
  return m;
}

Interval predict_interval(double yhat, const ConformalModel& model, const std::string& stratum, bool floor_zero,
                          bool allow_unknown) {
  const double q = model.half_width(stratum, allow_unknown);
  Interval iv{yhat - q, yhat + q, false};
  if (floor_zero && iv.lower < 0.0) {
    iv.lower = 0.0;
    iv.floored = true;
  }
  return iv;
}

IntervalReport evaluate_intervals(std::span<const double> y, std::span<const Interval> intervals) {
  if (y.size() != intervals.size()) throw std::invalid_argument("observations and intervals must be aligned");
  if (y.empty()) throw std::invalid_argument("interval evaluation of empty input");
  IntervalReport r;
  r.n = y.size();
  std::size_t covered = 0;
  double width = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] >= intervals[i].lower && y[i] <= intervals[i].upper) ++covered;
    width += intervals[i].upper - intervals[i].lower;
  }
  r.picp = static_cast<double>(covered) / static_cast<double>(y.size());
  r.mpiw = width / static_cast<double>(y.size());
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double range = *hi - *lo;
  r.pinaw = range > 0.0 ? r.mpiw / range : kNaN;
  return r;
}

namespace {

// Ranks ascending, ties averaged, NaN last.
std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto key = [&](std::size_t i) { return std::isnan(v[i]) ? kInf : v[i]; };
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && key(idx[j]) == key(idx[i])) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) rank[idx[t]] = r;
    i = j;
  }
  return rank;
}

}  // namespace

std::vector<IntervalReport> evaluate_intervals_stratified(std::span<const double> y,
                                                          std::span<const Interval> intervals,
                                                          std::span<const std::string> strata) {
  if (strata.size() != y.size()) throw std::invalid_argument("strata must align with observations");
  std::vector<IntervalReport> out = {evaluate_intervals(y, intervals)};
  std::map<std::string, std::pair<std::vector<double>, std::vector<Interval>>> groups;
  for (std::size_t i = 0; i < y.size(); ++i) {
    groups[strata[i]].first.push_back(y[i]);
    groups[strata[i]].second.push_back(intervals[i]);
  }
  std::vector<double> mpiw;
  std::vector<double> pinaw;
  for (const auto& [s, g] : groups) {
    IntervalReport r = evaluate_intervals(g.first, g.second);
    r.label = s;
    mpiw.push_back(r.mpiw);
    pinaw.push_back(r.pinaw);
    out.push_back(std::move(r));
  }
  const auto r1 = average_ranks(mpiw);
  const auto r2 = average_ranks(pinaw);
  for (std::size_t i = 0; i < r1.size(); ++i) out[i + 1].avg_rank = (r1[i] + r2[i]) / 2.0;
  return out;
}

}  // namespace geoval
