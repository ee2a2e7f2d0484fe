#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoval/predictor.hpp"

namespace geoval {

struct GbrtParams {
  int n_trees = 200;
  int max_depth = 6;
  double learning_rate = 0.1;
  int min_samples_leaf = 5;
  double subsample_rows = 1.0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output, already scaled by the learning rate
};

/// Binary regression tree; x[feature] <= threshold goes left. Node 0 is the root.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  int depth() const;
};

/// Least-squares gradient boosted regression trees.
class GbrtModel : public Predictor {
 public:
  GbrtModel() = default;
  GbrtModel(double base, std::size_t n_features) : base_(base), n_features_(n_features) {}

  double predict(std::span<const double> x) const override;
  using Predictor::predict;
  std::vector<double> feature_importances() const override { return importances_; }

  double base() const noexcept { return base_; }
  std::size_t n_features() const noexcept { return n_features_; }
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

  /// Training MSE after the base model and after each boosting stage.
  const std::vector<double>& train_loss() const noexcept { return train_loss_; }

  void add_tree(RegressionTree tree) { trees_.push_back(std::move(tree)); }
  void set_importances(std::vector<double> imp) { importances_ = std::move(imp); }

 private:
  friend GbrtModel fit_gbrt(const Matrix&, std::span<const double>, const GbrtParams&, Diagnostics*);

  double base_ = 0.0;
  std::size_t n_features_ = 0;
  std::vector<RegressionTree> trees_;
  std::vector<double> importances_;
  std::vector<double> train_loss_;
};

/// Stagewise boosting from mean(y) with exact greedy variance-reduction
/// splits. Equal gains resolve to the lowest feature index, then the lowest
/// threshold. A design with no columns or a constant y yields the constant
/// mean model and a diagnostic.
GbrtModel fit_gbrt(const Matrix& x, std::span<const double> y, const GbrtParams& params,
                   Diagnostics* diag = nullptr);

enum class Transform { identity, log1p };
std::string_view to_string(Transform t);
Transform parse_transform(std::string_view s);

/// Affine map y' = a + b * y.
struct AffineCorrection {
  double a = 0.0;
  double b = 1.0;
  std::size_t n = 0;
  bool fallback = false;  // stratum too small; global pair in use
  bool identity_forced = false;  // zero-variance predictions

  double apply(double y) const { return a + b * y; }
};

/// Per-stratum OLS recalibration of predictions with a global fallback.
struct StratumCalibrator {
  std::map<std::string, AffineCorrection> per_stratum;
  AffineCorrection global;
  std::size_t min_count = 50;

  const AffineCorrection& correction_for(const std::string& stratum) const;
  double apply(double prediction, const std::string& stratum) const {
    return correction_for(stratum).apply(prediction);
  }
};

/// Regresses observations on predictions within each stratum. Strata with
/// fewer than `min_count` pairs use the pooled fit.
StratumCalibrator fit_stratum_calibration(std::span<const double> predictions, std::span<const double> observations,
                                          std::span<const std::string> strata, std::size_t min_count = 50,
                                          Diagnostics* diag = nullptr);

/// A fitted per-target model: selected feature subset, target transform and
/// boosted trees. predict() takes the full covariate vector of the dataset
/// the model was bound to.
class TargetModel : public Predictor {
 public:
  std::string target;
  Transform transform = Transform::identity;
  bool floor_zero = false;
  std::vector<std::string> feature_names;  // model column order
  std::vector<std::size_t> feature_indices;  // positions in the bound covariate vector
  std::size_t input_width = 0;
  GbrtModel gbrt;
  std::optional<StratumCalibrator> calibrator;

  double predict(std::span<const double> x) const override;
  using Predictor::predict;
  std::vector<double> feature_importances() const override;

  /// predict() followed by the stratum calibration (when present) and floor.
  double predict_calibrated(std::span<const double> x, const std::string& stratum) const;

  /// Maps the recorded feature names onto a new column layout.
  void bind(const std::vector<std::string>& columns);

  double forward(double y) const;
  double inverse(double z) const;
};

}  // namespace geoval
