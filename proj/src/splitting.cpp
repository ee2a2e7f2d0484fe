#include "geoval/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace geoval {

namespace {

struct Groups {
  std::vector<std::string> strata;                     // sorted labels
  std::vector<std::vector<std::size_t>> counts;        // [group][stratum]
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> totals;                     // per stratum
  std::size_t n = 0;
};

Groups tabulate(const std::vector<std::vector<std::size_t>>& members, std::span<const std::string> labels) {
  Groups g;
  std::map<std::string, std::size_t> index;
  for (const auto& l : labels) index.emplace(l, 0);
  for (const auto& [l, _] : index) g.strata.push_back(l);
  std::size_t j = 0;
  for (auto& [_, v] : index) v = j++;

  g.totals.assign(g.strata.size(), 0);
  for (const auto& m : members) {
    std::vector<std::size_t> c(g.strata.size(), 0);
    for (auto i : m) {
      if (i >= labels.size()) throw std::out_of_range("group member beyond stratum label count");
      ++c[index.at(labels[i])];
    }
    for (std::size_t s = 0; s < c.size(); ++s) g.totals[s] += c[s];
    g.sizes.push_back(m.size());
    g.n += m.size();
    g.counts.push_back(std::move(c));
  }
  return g;
}

struct Allocation {
  std::vector<int> group_to_part;
  std::vector<std::vector<std::size_t>> part_counts;
  std::vector<std::size_t> oversized;
};

// Greedy largest-first partition of groups into parts with target fractions.
// The imbalance objective is the chi-square distance between realised and
// expected per-stratum counts, sum_{p,s} (n_ps - w_p N_s)^2 / (w_p N_s).
Allocation greedy_partition(const Groups& g, std::span<const double> fractions, std::uint64_t seed) {
  const std::size_t parts = fractions.size();
  const std::size_t n_strata = g.strata.size();
  const std::size_t n_groups = g.sizes.size();

  std::vector<std::size_t> order(n_groups);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0xF01D));
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return g.sizes[a] > g.sizes[b]; });

  Allocation out;
  out.group_to_part.assign(n_groups, -1);
  out.part_counts.assign(parts, std::vector<std::size_t>(n_strata, 0));
  std::vector<std::size_t> part_sizes(parts, 0);

  for (std::size_t gi : order) {
    const double share = static_cast<double>(g.n) / static_cast<double>(parts);
    if (static_cast<double>(g.sizes[gi]) > 2.0 * share) out.oversized.push_back(gi);
  }

  std::size_t remaining = n_groups;
  for (std::size_t gi : order) {
    const auto& c = g.counts[gi];
    const std::size_t empty_parts =
        static_cast<std::size_t>(std::count(part_sizes.begin(), part_sizes.end(), std::size_t{0}));
    const bool force_empty = empty_parts > 0 && remaining <= empty_parts;

    int best = -1;
    double best_cost = kInf;
    for (std::size_t p = 0; p < parts; ++p) {
      if (force_empty && part_sizes[p] != 0) continue;
      double cost = 0.0;
      for (std::size_t s = 0; s < n_strata; ++s) {
        if (c[s] == 0) continue;
        const double expected = fractions[p] * static_cast<double>(g.totals[s]);
        const double before = static_cast<double>(out.part_counts[p][s]) - expected;
        const double after = before + static_cast<double>(c[s]);
        cost += (after * after - before * before) / expected;
      }
      if (best < 0 || cost < best_cost - 1e-12 * std::max(1.0, std::abs(best_cost))) {
        best_cost = cost;
        best = static_cast<int>(p);
      }
    }
    out.group_to_part[gi] = best;
    part_sizes[static_cast<std::size_t>(best)] += g.sizes[gi];
    for (std::size_t s = 0; s < n_strata; ++s) out.part_counts[static_cast<std::size_t>(best)][s] += c[s];
    --remaining;
  }
  return out;
}

FoldPlan make_plan(const std::vector<std::vector<std::size_t>>& members, std::span<const std::string> strata, int k,
                   std::uint64_t seed, const std::vector<int>& group_ids) {
  if (k < 2) throw std::invalid_argument("fold count k must be at least 2");
  if (static_cast<std::size_t>(k) > members.size())
    throw std::invalid_argument("fold count k=" + std::to_string(k) + " exceeds the number of blocks (" +
                                std::to_string(members.size()) + ")");

  const Groups g = tabulate(members, strata);
  const std::vector<double> fractions(static_cast<std::size_t>(k), 1.0 / k);
  const Allocation a = greedy_partition(g, fractions, seed);

  FoldPlan plan;
  plan.k = k;
  plan.block_to_fold = a.group_to_part;
  plan.strata = g.strata;
  plan.stratum_counts = a.part_counts;
  plan.sample_to_fold.assign(strata.size(), -1);
  plan.fold_sizes.assign(static_cast<std::size_t>(k), 0);
  for (std::size_t b = 0; b < members.size(); ++b) {
    const int f = a.group_to_part[b];
    for (auto i : members[b]) plan.sample_to_fold[i] = f;
    plan.fold_sizes[static_cast<std::size_t>(f)] += members[b].size();
  }
  for (auto gi : a.oversized) {
    plan.oversized_blocks.push_back(group_ids[gi]);
    plan.diagnostics.push_back("block " + std::to_string(group_ids[gi]) + " holds " +
                               std::to_string(members[gi].size()) +
                               " samples, more than twice a fold's share; assigned first");
  }
  return plan;
}

}  // namespace

double FoldPlan::max_share_deviation() const {
  std::vector<double> totals(strata.size(), 0.0);
  double n = 0.0;
  for (const auto& row : stratum_counts)
    for (std::size_t s = 0; s < row.size(); ++s) {
      totals[s] += static_cast<double>(row[s]);
      n += static_cast<double>(row[s]);
    }
  double worst = 0.0;
  for (std::size_t f = 0; f < stratum_counts.size(); ++f) {
    const double size = static_cast<double>(fold_sizes[f]);
    if (size == 0.0) continue;
    for (std::size_t s = 0; s < strata.size(); ++s)
      worst = std::max(worst, std::abs(static_cast<double>(stratum_counts[f][s]) / size - totals[s] / n));
  }
  return worst;
}

std::vector<std::size_t> FoldPlan::samples_in_fold(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sample_to_fold.size(); ++i)
    if (sample_to_fold[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::blocks_in_fold(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t b = 0; b < block_to_fold.size(); ++b)
    if (block_to_fold[b] == fold) out.push_back(b);
  return out;
}

FoldPlan allocate_folds(const std::vector<SpatialBlock>& blocks, std::span<const std::string> strata, int k,
                        std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> members;
  std::vector<int> ids;
  members.reserve(blocks.size());
  for (const auto& b : blocks) {
    members.push_back(b.members);
    ids.push_back(b.block_id);
  }
  return make_plan(members, strata, k, seed, ids);
}

FoldPlan allocate_random_folds(std::span<const std::string> strata, int k, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> members(strata.size());
  std::vector<int> ids(strata.size());
  for (std::size_t i = 0; i < strata.size(); ++i) {
    members[i] = {i};
    ids[i] = static_cast<int>(i);
  }
  return make_plan(members, strata, k, seed, ids);
}

CalibrationTestSplit split_calibration_test(const std::vector<SpatialBlock>& blocks,
                                            std::span<const std::string> strata, double test_fraction,
                                            std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 0.5))
    throw std::invalid_argument("test_fraction must lie in (0, 0.5)");
  if (blocks.size() < 2) throw std::invalid_argument("a calibration/test split needs at least two blocks");

  std::vector<std::vector<std::size_t>> members;
  for (const auto& b : blocks) members.push_back(b.members);
  const Groups g = tabulate(members, strata);
  const std::vector<double> fractions = {1.0 - test_fraction, test_fraction};
  const Allocation a = greedy_partition(g, fractions, derive_seed(seed, 0x7E57));

  CalibrationTestSplit out;
  out.strata = g.strata;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto& side_blocks = a.group_to_part[b] == 1 ? out.test_blocks : out.calibration_blocks;
    auto& side_samples = a.group_to_part[b] == 1 ? out.test_samples : out.calibration_samples;
    side_blocks.push_back(b);
    side_samples.insert(side_samples.end(), blocks[b].members.begin(), blocks[b].members.end());
  }
  std::sort(out.test_samples.begin(), out.test_samples.end());
  std::sort(out.calibration_samples.begin(), out.calibration_samples.end());
  for (std::size_t s = 0; s < g.strata.size(); ++s)
    out.test_share_by_stratum.push_back(static_cast<double>(a.part_counts[1][s]) /
                                        static_cast<double>(g.totals[s]));
  return out;
}

std::vector<double> oof_predictions(const FoldPlan& plan, const Trainer& trainer, const Matrix& x,
                                    std::span<const double> y) {
  if (x.rows() != y.size() || plan.sample_to_fold.size() != y.size())
    throw std::invalid_argument("fold plan, covariates and targets must have the same length");
  std::vector<double> out(y.size(), kNaN);
  for (int f = 0; f < plan.k; ++f) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (std::isnan(y[i])) continue;
      if (plan.sample_to_fold[i] < 0) throw std::invalid_argument("sample without fold assignment");
      (plan.sample_to_fold[i] == f ? test : train).push_back(i);
    }
    if (test.empty()) continue;
    if (train.empty()) throw PipelineError("fold " + std::to_string(f) + ": no labeled training samples");
    std::vector<double> ytrain;
    ytrain.reserve(train.size());
    for (auto i : train) ytrain.push_back(y[i]);
    std::unique_ptr<Predictor> model;
    try {
      model = trainer(x.select_rows(train), ytrain, f);
    } catch (const std::exception& e) {
      throw PipelineError("fold " + std::to_string(f) + ": training failed: " + e.what());
    }
    if (!model) throw PipelineError("fold " + std::to_string(f) + ": trainer returned no model");
    for (auto i : test) out[i] = model->predict(x.row(i));
  }
  return out;
}

}  // namespace geoval
