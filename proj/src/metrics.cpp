#include "geoval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "geoval/data.hpp"

namespace geoval {

namespace {

void check_aligned(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("observed and predicted lengths differ");
  if (y.empty()) throw std::invalid_argument("metric of empty input");
}

std::vector<double> apply(std::span<const double> v, Transform t) {
  std::vector<double> out(v.begin(), v.end());
  if (t == Transform::log1p) {
    for (double& x : out) {
      if (!(x > -1.0)) throw std::invalid_argument("log1p transform requires values > -1");
      x = std::log1p(x);
    }
  }
  return out;
}

}  // namespace

double rmse(std::span<const double> y, std::span<const double> yhat) {
  check_aligned(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> yhat) {
  check_aligned(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

double bias(std::span<const double> y, std::span<const double> yhat) {
  check_aligned(y, yhat);
  return mean(yhat) - mean(y);
}

double nrmse_minmax(std::span<const double> y, std::span<const double> yhat) {
  check_aligned(y, yhat);
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw std::invalid_argument("NRMSE undefined for constant observations");
  return rmse(y, yhat) / range;
}

double ccc(std::span<const double> y, std::span<const double> yhat, Transform transform, Diagnostics* diag) {
  check_aligned(y, yhat);
  if (y.size() < 2) throw std::invalid_argument("CCC needs at least 2 points");
  const auto a = apply(y, transform);
  const auto b = apply(yhat, transform);
  const double ma = mean(a);
  const double mb = mean(b);
  double va = 0.0;
  double vb = 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
    cov += (a[i] - ma) * (b[i] - mb);
  }
  const double n = static_cast<double>(a.size());
  va /= n;
  vb /= n;
  cov /= n;
  if (va == 0.0 && vb == 0.0) throw std::invalid_argument("CCC undefined: both vectors are constant");
  if (va == 0.0 || vb == 0.0) {
    note(diag, "CCC: one vector is constant; returning 0");
    return 0.0;
  }
  return 2.0 * cov / (va + vb + (ma - mb) * (ma - mb));
}

double willmott_d(std::span<const double> y, std::span<const double> yhat, double p, Diagnostics* diag) {
  check_aligned(y, yhat);
  if (y.size() < 2) throw std::invalid_argument("Willmott's d needs at least 2 points");
  const double ybar = mean(y);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += std::pow(std::abs(y[i] - yhat[i]), p);
    den += std::pow(std::abs(yhat[i] - ybar) + std::abs(y[i] - ybar), p);
  }
  if (den == 0.0) {
    note(diag, "Willmott's d: zero denominator (constant, perfectly matched data); returning 1");
    return 1.0;
  }
  return 1.0 - num / den;
}

double rpiq(std::span<const double> y, std::span<const double> yhat, Transform transform, Diagnostics* diag) {
  check_aligned(y, yhat);
  if (y.size() < 4) throw std::invalid_argument("RPIQ needs at least 4 points");
  const auto a = apply(y, transform);
  const auto b = apply(yhat, transform);
  const double e = rmse(a, b);
  const double spread = iqr(a);
  if (e == 0.0) {
    note(diag, "RPIQ: zero RMSE; reporting +infinity");
    return kInf;
  }
  return spread / e;
}

MetricsRow compute_metrics(std::span<const double> y, std::span<const double> yhat, Transform ccc_transform,
                           Transform rpiq_transform) {
  MetricsRow row;
  row.n = y.size();
  Diagnostics diag;
  auto guarded = [&](const char* name, auto&& fn) {
    try {
      return static_cast<double>(fn());
    } catch (const std::invalid_argument& e) {
      diag.add(std::string(name) + ": " + e.what());
      return kNaN;
    }
  };
  row.rmse = guarded("RMSE", [&] { return rmse(y, yhat); });
  row.mae = guarded("MAE", [&] { return mae(y, yhat); });
  row.bias = guarded("Bias", [&] { return bias(y, yhat); });
  row.ccc_log1p = guarded("CCC", [&] { return ccc(y, yhat, ccc_transform, &diag); });
  row.willmott_d15 = guarded("d1.5", [&] { return willmott_d(y, yhat, 1.5, &diag); });
  row.rpiq = guarded("RPIQ", [&] { return rpiq(y, yhat, rpiq_transform, &diag); });
  row.nrmse_minmax = guarded("NRMSE", [&] { return nrmse_minmax(y, yhat); });
  row.diagnostics = std::move(diag.messages);
  return row;
}

std::vector<MetricsRow> evaluate_stratified(std::span<const double> y, std::span<const double> yhat,
                                            std::span<const std::string> labels, const std::string& group,
                                            const StratifiedOptions& opts) {
  if (labels.size() != y.size()) throw std::invalid_argument("stratum labels must align with observations");
  check_aligned(y, yhat);

  std::vector<MetricsRow> out;
  MetricsRow pooled = compute_metrics(y, yhat, opts.ccc_transform, opts.rpiq_transform);
  pooled.group = "pooled";
  pooled.label = "all";
  pooled.unstable = pooled.n < opts.unstable_floor;
  out.push_back(std::move(pooled));

  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (std::size_t i = 0; i < y.size(); ++i) {
    groups[labels[i]].first.push_back(y[i]);
    groups[labels[i]].second.push_back(yhat[i]);
  }
  for (const auto& [label, v] : groups) {
    MetricsRow r = compute_metrics(v.first, v.second, opts.ccc_transform, opts.rpiq_transform);
    r.group = group;
    r.label = label;
    r.unstable = r.n < opts.unstable_floor;
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

template <typename F>
void for_each_metric(MetricsRow& r, F&& f) {
  f(r.rmse);
  f(r.mae);
  f(r.ccc_log1p);
  f(r.willmott_d15);
  f(r.rpiq);
  f(r.bias);
  f(r.nrmse_minmax);
}

template <typename F>
void for_each_metric_pair(MetricsRow& dst, const MetricsRow& src, F&& f) {
  f(dst.rmse, src.rmse);
  f(dst.mae, src.mae);
  f(dst.ccc_log1p, src.ccc_log1p);
  f(dst.willmott_d15, src.willmott_d15);
  f(dst.rpiq, src.rpiq);
  f(dst.bias, src.bias);
  f(dst.nrmse_minmax, src.nrmse_minmax);
}

}  // namespace

std::vector<MetricsRow> aggregate_superclasses(const std::vector<MetricsRow>& rows,
                                               const std::map<std::string, std::string>& superclass_of) {
  struct Acc {
    MetricsRow sum;
    MetricsRow weight;
  };
  std::map<std::string, Acc> acc;
  std::string target;
  std::string scope;
  for (const auto& r : rows) {
    if (r.group == "pooled" || r.unstable) continue;
    target = r.target;
    scope = r.scope;
    auto it = superclass_of.find(r.label);
    const std::string sc = it == superclass_of.end() ? r.label : it->second;
    auto [slot, inserted] = acc.try_emplace(sc);
    if (inserted) {
      for_each_metric(slot->second.sum, [](double& v) { v = 0.0; });
      for_each_metric(slot->second.weight, [](double& v) { v = 0.0; });
    }
    auto& a = slot->second;
    a.sum.n += r.n;
    const double w = static_cast<double>(r.n);
    for_each_metric_pair(a.sum, r, [&](double& d, double s) {
      if (std::isfinite(s)) d += w * s;
    });
    for_each_metric_pair(a.weight, r, [&](double& d, double s) {
      if (std::isfinite(s)) d += w;
    });
  }
  std::vector<MetricsRow> out;
  for (auto& [sc, a] : acc) {
    MetricsRow r = a.sum;
    for_each_metric_pair(r, a.weight, [](double& d, double w) { d = w > 0.0 ? d / w : kNaN; });
    r.target = target;
    r.scope = scope;
    r.group = "superclass";
    r.label = sc;
    out.push_back(std::move(r));
  }
  return out;
}

MetricsRow average_rows(const std::vector<MetricsRow>& rows, const std::string& label) {
  MetricsRow out;
  for_each_metric(out, [](double& v) { v = 0.0; });
  MetricsRow count;
  for_each_metric(count, [](double& v) { v = 0.0; });
  for (const auto& r : rows) {
    out.n += r.n;
    out.target = r.target;
    out.scope = r.scope;
    for_each_metric_pair(out, r, [](double& d, double s) {
      if (std::isfinite(s)) d += s;
    });
    for_each_metric_pair(count, r, [](double& d, double s) {
      if (std::isfinite(s)) d += 1.0;
    });
  }
  for_each_metric_pair(out, count, [](double& d, double c) { d = c > 0.0 ? d / c : kNaN; });
  out.group = "fold_mean";
  out.label = label;
  return out;
}

std::string metrics_table(const std::vector<MetricsRow>& rows, char delimiter) {
  std::ostringstream os;
  const char d = delimiter;
  os << "target" << d << "scope" << d << "group" << d << "label" << d << "n" << d << "RMSE" << d << "MAE" << d
     << "CCC_log1p" << d << "d1.5" << d << "RPIQ" << d << "Bias" << d << "NRMSE_minmax" << d << "unstable\n";
  for (const auto& r : rows) {
    os << csv_escape(r.target) << d << csv_escape(r.scope) << d << csv_escape(r.group) << d << csv_escape(r.label)
       << d << r.n << d << format_double(r.rmse) << d << format_double(r.mae) << d << format_double(r.ccc_log1p)
       << d << format_double(r.willmott_d15) << d << format_double(r.rpiq) << d << format_double(r.bias) << d
       << format_double(r.nrmse_minmax) << d << (r.unstable ? "true" : "false") << '\n';
  }
  return os.str();
}

}  // namespace geoval
