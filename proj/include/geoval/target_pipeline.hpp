#pragma once

#include <span>
#include <string>
#include <vector>

#include "geoval/data.hpp"
#include "geoval/featsel.hpp"
#include "geoval/model.hpp"

namespace geoval {

/// Per-target fit: feature selection on the (transformed) target, then GBRT
/// on the surviving columns.
struct TargetFitOptions {
  FeatselConfig featsel;
  GbrtParams gbrt;
  Transform transform = Transform::identity;
  bool floor_zero = false;
  std::size_t min_labeled = 100;
};

struct TargetFit {
  TargetModel model;
  StabilityReport stability;
  std::vector<std::size_t> rows;  // dataset rows used for fitting
  Diagnostics diagnostics;
};

/// `rows` restricts fitting to a subset (empty = every labeled record).
TargetFit fit_target_pipeline(const Dataset& ds, const std::string& target, const TargetFitOptions& opts,
                              std::span<const std::size_t> rows = {});

}  // namespace geoval
