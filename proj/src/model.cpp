#include "geoval/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace geoval {

void GbrtParams::validate() const {
  if (n_trees < 0) throw std::invalid_argument("gbrt.n_trees must be non-negative");
  if (max_depth < 1) throw std::invalid_argument("gbrt.max_depth must be at least 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("gbrt.learning_rate must be positive");
  if (min_samples_leaf < 1) throw std::invalid_argument("gbrt.min_samples_leaf must be at least 1");
  if (!(subsample_rows > 0.0 && subsample_rows <= 1.0))
    throw std::invalid_argument("gbrt.subsample_rows must lie in (0, 1]");
}

double RegressionTree::predict(std::span<const double> x) const {
  if (nodes.empty()) return 0.0;
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].value;
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].feature < 0) continue;
    d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
    d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    best = std::max(best, d[i] + 1);
  }
  return best;
}

double GbrtModel::predict(std::span<const double> x) const {
  double f = base_;
  for (const auto& t : trees_) f += t.predict(x);
  return f;
}

namespace {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct NodeStats {
  std::size_t n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
};

double split_point(double lo, double hi) {
  double mid = lo + (hi - lo) / 2.0;
  if (!(mid < hi)) mid = lo;
  return mid;
}

// Grows one tree level by level on the in-bag rows. Each level makes a single
// pass over every presorted feature column.
RegressionTree grow_tree(const Matrix& x, const std::vector<std::vector<std::uint32_t>>& sorted,
                         std::span<const double> residual, std::vector<int>& node_of, const GbrtParams& p,
                         std::vector<double>& importances) {
  RegressionTree tree;
  const std::size_t n_rows = x.rows();
  const std::size_t n_cols = x.cols();
  const auto min_leaf = static_cast<std::size_t>(p.min_samples_leaf);

  NodeStats root;
  for (std::size_t i = 0; i < n_rows; ++i) {
    if (node_of[i] < 0) continue;
    ++root.n;
    root.sum += residual[i];
    root.sum_sq += residual[i] * residual[i];
  }
  tree.nodes.push_back({});
  std::vector<NodeStats> stats = {root};
  std::vector<int> frontier;
  if (root.n >= 2 * min_leaf && p.max_depth > 0) frontier.push_back(0);

  for (int depth = 0; depth < p.max_depth && !frontier.empty(); ++depth) {
    std::vector<int> slot(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < frontier.size(); ++s) slot[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
    std::vector<SplitCandidate> best(frontier.size());

    std::vector<std::size_t> left_n(frontier.size());
    std::vector<double> left_sum(frontier.size());
    std::vector<double> last(frontier.size());
    for (std::size_t f = 0; f < n_cols; ++f) {
      std::fill(left_n.begin(), left_n.end(), 0);
      std::fill(left_sum.begin(), left_sum.end(), 0.0);
      for (std::uint32_t row : sorted[f]) {
        const int node = node_of[row];
        if (node < 0) continue;
        const int s = slot[static_cast<std::size_t>(node)];
        if (s < 0) continue;
        const auto su = static_cast<std::size_t>(s);
        const double v = x(row, f);
        const auto& ns = stats[static_cast<std::size_t>(node)];
        if (left_n[su] >= min_leaf && v != last[su] && ns.n - left_n[su] >= min_leaf) {
          const double ln = static_cast<double>(left_n[su]);
          const double rn = static_cast<double>(ns.n - left_n[su]);
          const double rs = ns.sum - left_sum[su];
          const double gain =
              left_sum[su] * left_sum[su] / ln + rs * rs / rn - ns.sum * ns.sum / static_cast<double>(ns.n);
          if (gain > best[su].gain) best[su] = {gain, static_cast<int>(f), split_point(last[su], v)};
        }
        ++left_n[su];
        left_sum[su] += residual[row];
        last[su] = v;
      }
    }

    std::vector<int> next;
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      const int node = frontier[s];
      const auto& ns = stats[static_cast<std::size_t>(node)];
      // Gains are differences of terms bounded by sum_sq; below this they are rounding noise.
      if (best[s].feature < 0 || !(best[s].gain > 1e-9 * std::max(ns.sum_sq, 1e-300))) continue;
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      stats.push_back({});
      stats.push_back({});
      auto& nd = tree.nodes[static_cast<std::size_t>(node)];
      nd.feature = best[s].feature;
      nd.threshold = best[s].threshold;
      nd.left = left;
      nd.right = left + 1;
      importances[static_cast<std::size_t>(best[s].feature)] += best[s].gain;
    }
    // Route rows of split nodes to their children.
    for (std::size_t i = 0; i < n_rows; ++i) {
      const int node = node_of[i];
      if (node < 0) continue;
      const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
      if (nd.feature < 0) continue;
      const int child = x(i, static_cast<std::size_t>(nd.feature)) <= nd.threshold ? nd.left : nd.right;
      node_of[i] = child;
      auto& cs = stats[static_cast<std::size_t>(child)];
      ++cs.n;
      cs.sum += residual[i];
      cs.sum_sq += residual[i] * residual[i];
    }
    for (int node : frontier) {
      const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
      if (nd.feature < 0) continue;
      for (int child : {nd.left, nd.right})
        if (stats[static_cast<std::size_t>(child)].n >= 2 * min_leaf) next.push_back(child);
    }
    frontier = std::move(next);
  }

  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    auto& nd = tree.nodes[i];
    if (nd.feature >= 0) continue;
    const auto& ns = stats[i];
    nd.value = ns.n > 0 ? p.learning_rate * ns.sum / static_cast<double>(ns.n) : 0.0;
  }
  return tree;
}

double mse(std::span<const double> y, std::span<const double> f) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - f[i]) * (y[i] - f[i]);
  return s / static_cast<double>(y.size());
}

}  // namespace

GbrtModel fit_gbrt(const Matrix& x, std::span<const double> y, const GbrtParams& params, Diagnostics* diag) {
  params.validate();
  if (x.rows() != y.size()) throw std::invalid_argument("row count of X differs from length of y");
  if (y.size() < 2 * static_cast<std::size_t>(params.min_samples_leaf))
    throw std::invalid_argument("need at least 2*min_samples_leaf training rows, got " + std::to_string(y.size()));
  for (double v : y)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite training target");

  const double base = mean(y);
  GbrtModel model(base, x.cols());
  model.importances_.assign(x.cols(), 0.0);
  std::vector<double> f(y.size(), base);
  model.train_loss_.push_back(mse(y, f));

  const bool constant_y = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  if (x.cols() == 0 || constant_y) {
    note(diag, x.cols() == 0 ? "no covariate columns; fitted the constant mean model"
                             : "constant target; fitted the constant mean model");
    return model;
  }

  const std::size_t n = y.size();
  std::vector<std::vector<std::uint32_t>> sorted(x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    auto& s = sorted[c];
    s.resize(n);
    std::iota(s.begin(), s.end(), 0U);
    std::stable_sort(s.begin(), s.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, c) < x(b, c); });
  }

  Rng rng(derive_seed(params.seed, 0x6B72));
  const auto bag = static_cast<std::size_t>(std::max<double>(
      2.0 * params.min_samples_leaf, std::floor(params.subsample_rows * static_cast<double>(n))));
  std::vector<double> residual(n);
  std::vector<int> node_of(n);
  for (int t = 0; t < params.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - f[i];
    if (params.subsample_rows < 1.0 && bag < n) {
      std::fill(node_of.begin(), node_of.end(), -1);
      for (auto i : rng.sample_without_replacement(n, bag)) node_of[i] = 0;
    } else {
      std::fill(node_of.begin(), node_of.end(), 0);
    }
    RegressionTree tree = grow_tree(x, sorted, residual, node_of, params, model.importances_);
    for (std::size_t i = 0; i < n; ++i) f[i] += tree.predict(x.row(i));
    model.trees_.push_back(std::move(tree));
    model.train_loss_.push_back(mse(y, f));
  }
  return model;
}

std::string_view to_string(Transform t) { return t == Transform::log1p ? "log1p" : "identity"; }

Transform parse_transform(std::string_view s) {
  if (s == "identity" || s == "none") return Transform::identity;
  if (s == "log1p") return Transform::log1p;
  throw std::invalid_argument("unknown transform '" + std::string(s) + "' (expected identity or log1p)");
}

const AffineCorrection& StratumCalibrator::correction_for(const std::string& stratum) const {
  auto it = per_stratum.find(stratum);
  return it == per_stratum.end() ? global : it->second;
}

namespace {

AffineCorrection ols(const std::vector<double>& pred, const std::vector<double>& obs, const std::string& what,
                     Diagnostics* diag) {
  AffineCorrection c;
  c.n = pred.size();
  if (pred.empty()) return c;
  const double mp = mean(pred);
  const double mo = mean(obs);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sxx += (pred[i] - mp) * (pred[i] - mp);
    sxy += (pred[i] - mp) * (obs[i] - mo);
  }
  if (!(sxx > 1e-300) || !std::isfinite(sxy / sxx)) {
    note(diag, what + ": zero-variance predictions; identity correction used");
    c.identity_forced = true;
    return c;
  }
  c.b = sxy / sxx;
  c.a = mo - c.b * mp;
  return c;
}

}  // namespace

StratumCalibrator fit_stratum_calibration(std::span<const double> predictions, std::span<const double> observations,
                                          std::span<const std::string> strata, std::size_t min_count,
                                          Diagnostics* diag) {
  if (predictions.size() != observations.size() || predictions.size() != strata.size())
    throw std::invalid_argument("calibration inputs must be aligned");
  StratumCalibrator cal;
  cal.min_count = min_count;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  std::vector<double> all_p;
  std::vector<double> all_o;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (!std::isfinite(predictions[i]) || !std::isfinite(observations[i])) continue;
    groups[strata[i]].first.push_back(predictions[i]);
    groups[strata[i]].second.push_back(observations[i]);
    all_p.push_back(predictions[i]);
    all_o.push_back(observations[i]);
  }
  cal.global = ols(all_p, all_o, "global calibration", diag);
  for (const auto& [s, po] : groups) {
    if (po.first.size() < min_count) {
      AffineCorrection c = cal.global;
      c.n = po.first.size();
      c.fallback = true;
      cal.per_stratum[s] = c;
    } else {
      cal.per_stratum[s] = ols(po.first, po.second, "stratum '" + s + "'", diag);
    }
  }
  return cal;
}

double TargetModel::forward(double y) const { return transform == Transform::log1p ? std::log1p(y) : y; }

double TargetModel::inverse(double z) const {
  double y = transform == Transform::log1p ? std::expm1(z) : z;
  if (floor_zero) y = std::max(0.0, y);
  return y;
}

double TargetModel::predict(std::span<const double> x) const {
  if (x.size() != input_width)
    throw std::invalid_argument("covariate vector width " + std::to_string(x.size()) + " differs from bound width " +
                                std::to_string(input_width));
  thread_local std::vector<double> sub;
  sub.resize(feature_indices.size());
  for (std::size_t j = 0; j < feature_indices.size(); ++j) sub[j] = x[feature_indices[j]];
  return inverse(gbrt.predict(std::span<const double>(sub)));
}

double TargetModel::predict_calibrated(std::span<const double> x, const std::string& stratum) const {
  double y = predict(x);
  if (calibrator) {
    y = calibrator->apply(y, stratum);
    if (floor_zero) y = std::max(0.0, y);
  }
  return y;
}

std::vector<double> TargetModel::feature_importances() const {
  std::vector<double> out(input_width, 0.0);
  const auto imp = gbrt.feature_importances();
  for (std::size_t j = 0; j < feature_indices.size() && j < imp.size(); ++j) out[feature_indices[j]] = imp[j];
  return out;
}

void TargetModel::bind(const std::vector<std::string>& columns) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < columns.size(); ++i) pos.emplace(columns[i], i);
  std::vector<std::size_t> idx;
  for (const auto& name : feature_names) {
    auto it = pos.find(name);
    if (it == pos.end()) throw DataError("model feature '" + name + "' not present in the covariate columns");
    idx.push_back(it->second);
  }
  feature_indices = std::move(idx);
  input_width = columns.size();
}

}  // namespace geoval
