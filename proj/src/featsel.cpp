#include "geoval/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace geoval {

std::vector<std::size_t> correlation_filter(const Matrix& x, double threshold, Diagnostics* diag) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("correlation threshold must lie in (0, 1]");
  if (x.rows() < 2) throw std::invalid_argument("correlation filter needs at least 2 rows");
  const std::size_t n = x.rows();

  // Standardised columns; zero-variance columns get an empty vector.
  std::vector<std::vector<double>> z(x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    std::vector<double> col = x.column(c);
    for (double v : col)
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite value in covariate column " + std::to_string(c));
    const double m = mean(col);
    double ss = 0.0;
    for (double& v : col) {
      v -= m;
      ss += v * v;
    }
    const double norm = std::sqrt(ss);
    if (!(norm > 1e-12 * std::max(1.0, std::abs(m)) * std::sqrt(static_cast<double>(n)))) continue;
    for (double& v : col) v /= norm;
    z[c] = std::move(col);
  }

  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    if (z[c].empty()) {
      note(diag, "column " + std::to_string(c) + " has zero variance; dropped");
      continue;
    }
    bool keep = true;
    for (auto k : kept) {
      double r = 0.0;
      for (std::size_t i = 0; i < n; ++i) r += z[c][i] * z[k][i];
      if (std::abs(r) > threshold) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(c);
  }
  return kept;
}

void StabilityOptions::validate() const {
  if (iterations < 2) throw std::invalid_argument("featsel.iterations must be at least 2");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw std::invalid_argument("featsel.subsample must lie in (0, 1]");
  if (top_k < 1) throw std::invalid_argument("featsel.top_k must be at least 1");
  if (!(pi_threshold >= 0.0 && pi_threshold <= 1.0))
    throw std::invalid_argument("featsel.pi_threshold must lie in [0, 1]");
  oracle.validate();
}

StabilityReport stability_select(const Matrix& x, std::span<const double> y, std::span<const std::size_t> columns,
                                 std::span<const std::string> names, const StabilityOptions& opts) {
  opts.validate();
  if (x.rows() != y.size()) throw std::invalid_argument("row count of X differs from length of y");
  if (columns.size() != x.cols() || names.size() != x.cols())
    throw std::invalid_argument("column labels must match the width of X");

  StabilityReport rep;
  rep.columns.assign(columns.begin(), columns.end());
  rep.names.assign(names.begin(), names.end());
  rep.iterations = opts.iterations;
  rep.top_k = opts.top_k;
  rep.threshold = opts.pi_threshold;
  const std::size_t p = x.cols();
  const std::size_t n = y.size();
  std::vector<int> marks(p, 0);
  if (p > 0 && static_cast<std::size_t>(opts.top_k) >= p)
    rep.diagnostics.push_back("top_k (" + std::to_string(opts.top_k) + ") is not smaller than the " + std::to_string(p) +
                              " candidate features; pi only records whether a feature received any split gain");

  const auto m = std::min<std::size_t>(
      n, std::max<std::size_t>(2 * static_cast<std::size_t>(opts.oracle.min_samples_leaf),
                               static_cast<std::size_t>(std::floor(opts.subsample * static_cast<double>(n)))));

  for (int it = 0; it < opts.iterations && p > 0; ++it) {
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(it)));
    auto rows = rng.sample_without_replacement(n, m);
    std::sort(rows.begin(), rows.end());
    std::vector<double> ysub;
    ysub.reserve(rows.size());
    for (auto r : rows) ysub.push_back(y[r]);

    GbrtParams oracle = opts.oracle;
    oracle.seed = derive_seed(opts.seed, 0x5E1EC7ULL + static_cast<std::uint64_t>(it));
    std::vector<double> imp;
    try {
      imp = fit_gbrt(x.select_rows(rows), ysub, oracle).feature_importances();
    } catch (const std::exception& e) {
      throw PipelineError("stability selection iteration " + std::to_string(it) + ": " + e.what());
    }

    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < p; ++j)
      if (imp[j] > 0.0) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return imp[a] > imp[b]; });
    if (order.size() > static_cast<std::size_t>(opts.top_k)) order.resize(static_cast<std::size_t>(opts.top_k));
    for (auto j : order) ++marks[j];
  }

  rep.pi.resize(p);
  for (std::size_t j = 0; j < p; ++j) rep.pi[j] = static_cast<double>(marks[j]) / opts.iterations;
  rep.ranked.resize(p);
  std::iota(rep.ranked.begin(), rep.ranked.end(), 0);
  std::stable_sort(rep.ranked.begin(), rep.ranked.end(), [&](std::size_t a, std::size_t b) {
    if (rep.pi[a] != rep.pi[b]) return rep.pi[a] > rep.pi[b];
    return rep.columns[a] < rep.columns[b];
  });
  for (auto j : rep.ranked)
    if (rep.pi[j] >= opts.pi_threshold) rep.selected.push_back(rep.columns[j]);
  rep.stage_counts = {p, p, rep.selected.size()};
  return rep;
}

StabilityReport select_features(const Matrix& x, std::span<const double> y, const std::vector<std::string>& names,
                                const FeatselConfig& cfg) {
  if (names.size() != x.cols()) throw std::invalid_argument("feature names must match the width of X");
  if (!cfg.enabled) {
    StabilityReport rep;
    rep.columns.resize(x.cols());
    std::iota(rep.columns.begin(), rep.columns.end(), 0);
    rep.names = names;
    rep.selected = rep.columns;
    rep.stage_counts = {x.cols(), x.cols(), x.cols()};
    rep.diagnostics.push_back("feature selection disabled; every column kept");
    return rep;
  }
  Diagnostics diag;
  const auto kept = correlation_filter(x, cfg.corr_threshold, &diag);
  std::vector<std::string> kept_names;
  for (auto c : kept) kept_names.push_back(names[c]);
  StabilityReport rep = stability_select(x.select_cols(kept), y, kept, kept_names, cfg.stability);
  rep.stage_counts.initial = x.cols();
  rep.stage_counts.after_stage1 = kept.size();
  rep.diagnostics.insert(rep.diagnostics.begin(), diag.messages.begin(), diag.messages.end());
  if (rep.selected.empty() && !rep.ranked.empty()) {
    rep.selected.push_back(rep.columns[rep.ranked.front()]);
    rep.diagnostics.push_back("no feature reached the stability threshold; kept the top-ranked feature '" +
                              rep.names[rep.ranked.front()] + "'");
  }
  rep.stage_counts.after_stage2 = rep.selected.size();
  return rep;
}

std::string default_category(const std::string& feature_name) {
  const auto pos = feature_name.find('_');
  return pos == std::string::npos ? feature_name : feature_name.substr(0, pos);
}

CategoryStability category_stability(const StabilityReport& report,
                                     const std::function<std::string(const std::string&)>& categorize) {
  std::map<std::string, double> totals;
  for (std::size_t j = 0; j < report.names.size(); ++j) totals[categorize(report.names[j])] += report.pi[j];
  CategoryStability out;
  double sum = 0.0;
  for (const auto& [cat, t] : totals) {
    out.categories.push_back(cat);
    out.total.push_back(t);
    sum += t;
  }
  for (double t : out.total) out.share.push_back(sum > 0.0 ? t / sum : 0.0);
  return out;
}

CategoryStability category_stability(const StabilityReport& report,
                                     const std::map<std::string, std::string>& categories) {
  return category_stability(report, [&](const std::string& name) {
    auto it = categories.find(name);
    if (it == categories.end()) throw std::invalid_argument("feature '" + name + "' has no category");
    return it->second;
  });
}

}  // namespace geoval
