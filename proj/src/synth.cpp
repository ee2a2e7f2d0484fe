#include "geoval/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "geoval/spatial.hpp"

namespace geoval {

void SynthConfig::validate() const {
  if (n_samples < 2) throw ConfigError("synth.n_samples must be at least 2");
  if (!(extent_width_km > 0.0) || !(extent_height_km > 0.0)) throw ConfigError("synth.extent_km must be positive");
  if (!(spatial_range_km > 0.0)) throw ConfigError("synth.spatial_range_km must be positive");
  if (n_informative < 1) throw ConfigError("synth.n_informative must be at least 1");
  if (n_noise < 0) throw ConfigError("synth.n_noise must be non-negative");
  if (n_redundant < 0) throw ConfigError("synth.n_redundant must be non-negative");
  if (n_strata < 1) throw ConfigError("synth.n_strata must be at least 1");
  if (basis_functions < 1) throw ConfigError("synth.basis_functions must be at least 1");
  if (noise_sd < 0.0 || covariate_noise_sd < 0.0 || latent_sd < 0.0 || stratum_effect_sd < 0.0)
    throw ConfigError("synth noise scales must be non-negative");
  if (target_skew == TargetSkew::lognormal && !(target_scale > 0.0))
    throw ConfigError("synth.target_scale must be positive for lognormal targets");
  if (target_skew == TargetSkew::none && is_nonnegative_target(target_name))
    throw ConfigError("synth.target_skew 'none' can produce negative values for non-negative target '" +
                      target_name + "'");
  const double top = (origin_y_km + extent_height_km) / kEarthRadiusKm;
  if (std::abs(origin_y_km / kEarthRadiusKm) > 1.4 || std::abs(top) > 1.4)
    throw ConfigError("synth extent reaches too close to a pole");
}

SmoothField::SmoothField(double range_km, int basis_functions, Rng& rng) {
  // Gaussian covariance exp(-d^2 / (2 l^2)) has practical range sqrt(3) l.
  const double length = range_km / std::sqrt(3.0);
  for (int m = 0; m < basis_functions; ++m) {
    wx_.push_back(rng.normal() / length);
    wy_.push_back(rng.normal() / length);
    phase_.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
  }
  amplitude_ = std::sqrt(2.0 / basis_functions);
}

double SmoothField::operator()(double x_km, double y_km) const {
  double s = 0.0;
  for (std::size_t m = 0; m < wx_.size(); ++m) s += std::cos(wx_[m] * x_km + wy_[m] * y_km + phase_[m]);
  return amplitude_ * s;
}

namespace {

std::string indexed(const char* prefix, int i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%02d", prefix, i);
  return buf;
}

}  // namespace

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t n = cfg.n_samples;
  SynthResult out;
  auto& ds = out.dataset;
  auto& truth = out.truth;

  std::vector<double> px(n);
  std::vector<double> py(n);
  for (std::size_t i = 0; i < n; ++i) {
    px[i] = rng.uniform(0.0, cfg.extent_width_km);
    py[i] = rng.uniform(0.0, cfg.extent_height_km);
  }

  // Strata: Voronoi cells around seeded centres.
  std::vector<std::pair<double, double>> centers;
  static const char* const kSuper[] = {"Temperate", "Subtropics", "Cold", "Special"};
  for (int s = 0; s < cfg.n_strata; ++s) {
    centers.emplace_back(rng.uniform(0.0, cfg.extent_width_km), rng.uniform(0.0, cfg.extent_height_km));
    const std::string label = indexed("AEZ", s + 1);
    const double effect = cfg.white_noise ? 0.0 : cfg.stratum_effect_sd * rng.normal();
    truth.stratum_effects[label] = effect;
    truth.superclass_of[label] = kSuper[s % 4];
    truth.stratum_centers.push_back(
        unproject_sinusoidal({cfg.origin_x_km + centers.back().first, cfg.origin_y_km + centers.back().second}));
  }

  const int p_inf = cfg.n_informative;
  std::vector<SmoothField> inf_fields;
  for (int j = 0; j < p_inf; ++j) inf_fields.emplace_back(cfg.spatial_range_km, cfg.basis_functions, rng);
  std::vector<SmoothField> noise_fields;
  for (int j = 0; j < cfg.n_noise; ++j) noise_fields.emplace_back(cfg.spatial_range_km, cfg.basis_functions, rng);
  const SmoothField latent(cfg.spatial_range_km, cfg.basis_functions, rng);

  for (int j = 0; j < p_inf; ++j) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    truth.coefficients.push_back(sign / (1.0 + 0.25 * j));
  }
  struct Mix {
    int source;
    int second;
    double scale;
    double offset;
    double weight;
  };
  std::vector<Mix> mixes;
  for (int j = 0; j < cfg.n_redundant; ++j) {
    const int src = j % p_inf;
    const int second = p_inf > 1 ? (src + 1) % p_inf : src;
    mixes.push_back({src, second, rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0), p_inf > 1 ? 0.1 : 0.0});
  }

  for (int j = 0; j < p_inf; ++j) ds.feature_names.push_back(indexed("EO_inf", j));
  for (int j = 0; j < cfg.n_redundant; ++j) ds.feature_names.push_back(indexed("EO_red", j));
  static const char* const kNoiseCat[] = {"CLIM_noise", "TERR_noise", "EO_noise"};
  for (int j = 0; j < cfg.n_noise; ++j) ds.feature_names.push_back(indexed(kNoiseCat[j % 3], j));
  truth.informative.assign(ds.feature_names.begin(), ds.feature_names.begin() + p_inf);
  truth.redundant.assign(ds.feature_names.begin() + p_inf, ds.feature_names.begin() + p_inf + cfg.n_redundant);
  truth.noise.assign(ds.feature_names.begin() + p_inf + cfg.n_redundant, ds.feature_names.end());
  ds.target_names = {cfg.target_name};

  static const int kYears[] = {2009, 2012, 2015, 2018};
  out.link.resize(n);
  ds.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord rec;
    rec.id = "S" + std::to_string(i + 1);
    rec.location = unproject_sinusoidal({cfg.origin_x_km + px[i], cfg.origin_y_km + py[i]});
    rec.year = kYears[rng.index(4)];
    const double u = rng.uniform();
    rec.depth = u < 0.6 ? DepthClass::d0_30 : (u < 0.85 ? DepthClass::d30_60 : DepthClass::d60_plus);

    std::size_t best = 0;
    double best_d = kInf;
    for (std::size_t s = 0; s < centers.size(); ++s) {
      const double dx = px[i] - centers[s].first;
      const double dy = py[i] - centers[s].second;
      const double d = dx * dx + dy * dy;
      if (d < best_d) {
        best_d = d;
        best = s;
      }
    }
    rec.stratum = indexed("AEZ", static_cast<int>(best) + 1);

    std::vector<double> cov;
    cov.reserve(ds.feature_names.size());
    for (int j = 0; j < p_inf; ++j) {
      const double base = cfg.white_noise ? rng.normal() : inf_fields[static_cast<std::size_t>(j)](px[i], py[i]);
      cov.push_back(base + cfg.covariate_noise_sd * rng.normal());
    }
    for (const auto& m : mixes) {
      const double v = m.scale * (cov[static_cast<std::size_t>(m.source)] +
                                  m.weight * cov[static_cast<std::size_t>(m.second)]) +
                       m.offset + 0.02 * rng.normal();
      cov.push_back(v);
    }
    for (int j = 0; j < cfg.n_noise; ++j) {
      const double base = (cfg.white_noise || !cfg.smooth_noise_features)
                              ? rng.normal()
                              : noise_fields[static_cast<std::size_t>(j)](px[i], py[i]);
      cov.push_back(base + cfg.covariate_noise_sd * rng.normal());
    }

    double eta = 0.0;
    for (int j = 0; j < p_inf; ++j) {
      const double z = cov[static_cast<std::size_t>(j)];
      const double g = (cfg.nonlinear && j % 2 == 1) ? 1.2 * std::tanh(1.5 * z) : z;
      eta += truth.coefficients[static_cast<std::size_t>(j)] * g;
    }
    eta += truth.stratum_effects[rec.stratum];
    if (!cfg.white_noise) {
      eta += cfg.latent_sd * latent(px[i], py[i]);
      if (cfg.trend) {
        const double t = cfg.trend->direction == TrendDirection::north ? py[i] / cfg.extent_height_km
                                                                       : px[i] / cfg.extent_width_km;
        eta += cfg.trend->magnitude * (t - 0.5);
      }
    }
    out.link[i] = eta;
    eta += cfg.noise_sd * rng.normal();

    const double y = cfg.target_skew == TargetSkew::lognormal ? cfg.target_scale * std::exp(cfg.link_scale * eta)
                                                              : eta;
    rec.targets[cfg.target_name] = y;
    rec.covariates = std::move(cov);
    ds.records.push_back(std::move(rec));
  }
  ds.check();
  return out;
}

AutocorrelationCheck spatial_autocorrelation_check(std::span<const LatLon> points, std::span<const double> values,
                                                   double range_km) {
  if (points.size() != values.size()) throw std::invalid_argument("points and values must be aligned");
  if (points.size() < 30) throw std::invalid_argument("autocorrelation check needs at least 30 samples");
  if (!(range_km > 0.0)) throw std::invalid_argument("range must be positive");
  const double m = mean(values);
  double var = 0.0;
  for (double v : values) var += (v - m) * (v - m);
  if (!(var > 0.0)) throw std::invalid_argument("autocorrelation undefined for a constant field");

  struct Acc {
    double sum = 0.0;
    double sum_sq = 0.0;
    double cross = 0.0;
    std::size_t pairs = 0;
  };
  Acc close;
  Acc far;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double d = haversine_km(points[i], points[j]);
      Acc* a = d < range_km / 2.0 ? &close : (d > range_km ? &far : nullptr);
      if (a == nullptr) continue;
      a->sum += values[i] + values[j];
      a->sum_sq += values[i] * values[i] + values[j] * values[j];
      a->cross += values[i] * values[j];
      ++a->pairs;
    }
  }
  if (close.pairs < 30) throw std::invalid_argument("too few close pairs for an autocorrelation estimate");
  // Pearson correlation over the symmetrised pair set.
  auto corr = [](const Acc& a) {
    if (a.pairs == 0) return kNaN;
    const double cnt = 2.0 * static_cast<double>(a.pairs);
    const double mu = a.sum / cnt;
    const double v = a.sum_sq / cnt - mu * mu;
    const double c = 2.0 * a.cross / cnt - mu * mu;
    return v > 0.0 ? c / v : kNaN;
  };
  AutocorrelationCheck out;
  out.close_pairs = close.pairs;
  out.far_pairs = far.pairs;
  out.close_correlation = corr(close);
  out.far_correlation = corr(far);
  out.gap = out.close_correlation - out.far_correlation;
  return out;
}

}  // namespace geoval
