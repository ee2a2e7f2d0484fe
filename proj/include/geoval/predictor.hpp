#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "geoval/common.hpp"

namespace geoval {

/// Anything that maps a covariate vector to a real prediction. Fitted
/// predictors are immutable and may be shared across threads.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual double predict(std::span<const double> x) const = 0;

  /// Non-negative per-feature importance, one entry per input column.
  virtual std::vector<double> feature_importances() const = 0;

  std::vector<double> predict(const Matrix& x) const {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
    return out;
  }
};

/// Fits a predictor on a training subset. `fold` is the held-out fold index
/// (or -1 for a full-data fit) and is only informational.
using Trainer =
    std::function<std::unique_ptr<Predictor>(const Matrix& x, std::span<const double> y, int fold)>;

}  // namespace geoval
