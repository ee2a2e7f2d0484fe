#include "geoval/target_pipeline.hpp"

#include <cmath>

namespace geoval {

TargetFit fit_target_pipeline(const Dataset& ds, const std::string& target, const TargetFitOptions& opts,
                              std::span<const std::size_t> rows) {
  TargetFit fit;
  auto consider = [&](std::size_t i) {
    if (ds.records[i].target(target)) fit.rows.push_back(i);
  };
  if (rows.empty()) {
    for (std::size_t i = 0; i < ds.size(); ++i) consider(i);
  } else {
    for (auto i : rows) consider(i);
  }
  if (fit.rows.size() < opts.min_labeled)
    throw DataError("target '" + target + "' has " + std::to_string(fit.rows.size()) +
                    " labeled samples, fewer than the required " + std::to_string(opts.min_labeled));

  auto& model = fit.model;
  model.target = target;
  model.transform = opts.transform;
  model.floor_zero = opts.floor_zero;

  std::vector<double> z;
  z.reserve(fit.rows.size());
  for (auto i : fit.rows) {
    const double v = model.forward(*ds.records[i].target(target));
    if (!std::isfinite(v)) throw DataError("target '" + target + "' is outside the domain of the transform");
    z.push_back(v);
  }
  const Matrix x = ds.covariate_matrix().select_rows(fit.rows);

  fit.stability = select_features(x, z, ds.feature_names, opts.featsel);
  for (const auto& m : fit.stability.diagnostics) fit.diagnostics.add(m);

  model.feature_indices = fit.stability.selected;
  for (auto c : model.feature_indices) model.feature_names.push_back(ds.feature_names[c]);
  model.input_width = ds.width();
  model.gbrt = fit_gbrt(x.select_cols(model.feature_indices), z, opts.gbrt, &fit.diagnostics);
  return fit;
}

}  // namespace geoval
