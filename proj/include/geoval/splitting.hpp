#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "geoval/predictor.hpp"
#include "geoval/spatial.hpp"

namespace geoval {

/// Block-to-fold assignment with the per-fold stratum tables attached.
struct FoldPlan {
  int k = 0;
  std::vector<int> block_to_fold;   // indexed by block position
  std::vector<int> sample_to_fold;  // indexed by sample
  std::vector<std::string> strata;  // sorted distinct labels
  std::vector<std::vector<std::size_t>> stratum_counts;  // [fold][stratum]
  std::vector<std::size_t> fold_sizes;
  std::vector<int> oversized_blocks;  // block ids larger than twice a fold's share
  std::vector<std::string> diagnostics;

  /// max over folds and strata of |fold share - global share|.
  double max_share_deviation() const;
  std::vector<std::size_t> samples_in_fold(int fold) const;
  std::vector<std::size_t> blocks_in_fold(int fold) const;
};

/// Greedy stratified group k-fold. Blocks are visited largest first (seeded
/// shuffle breaks size ties) and each goes to the fold where it raises the
/// stratum imbalance least; equal costs resolve to the lowest fold index.
/// `strata` holds one label per sample.
FoldPlan allocate_folds(const std::vector<SpatialBlock>& blocks, std::span<const std::string> strata, int k,
                        std::uint64_t seed);

/// Sample-level stratified random folds (every sample is its own group).
/// This is the non-spatial baseline used for blocked-vs-random comparisons.
FoldPlan allocate_random_folds(std::span<const std::string> strata, int k, std::uint64_t seed);

struct CalibrationTestSplit {
  std::vector<std::size_t> calibration_blocks;  // block positions
  std::vector<std::size_t> test_blocks;
  std::vector<std::size_t> calibration_samples;
  std::vector<std::size_t> test_samples;
  std::vector<std::string> strata;
  std::vector<double> test_share_by_stratum;  // aligned with `strata`
};

/// Block-level stratum-balanced hold-out split; 0 < test_fraction < 0.5.
CalibrationTestSplit split_calibration_test(const std::vector<SpatialBlock>& blocks,
                                            std::span<const std::string> strata, double test_fraction,
                                            std::uint64_t seed);

/// Out-of-fold predictions: sample i is predicted by the model trained on
/// every fold except fold(i). Unlabeled samples (NaN in `y`) are neither
/// used for training nor predicted; their output stays NaN.
std::vector<double> oof_predictions(const FoldPlan& plan, const Trainer& trainer, const Matrix& x,
                                    std::span<const double> y);

}  // namespace geoval
