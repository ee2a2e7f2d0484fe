#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoval/data.hpp"

namespace geoval {

enum class TargetSkew { none, lognormal };
enum class TrendDirection { north, east };

struct SynthTrend {
  TrendDirection direction = TrendDirection::north;
  double magnitude = 0.0;  // link-scale change across the whole extent
};

struct SynthConfig {
  std::size_t n_samples = 1500;
  double extent_width_km = 1000.0;
  double extent_height_km = 1000.0;
  /// South-west corner in sinusoidal km. Multiples of the block size keep
  /// the extent aligned with the blocking grid.
  double origin_x_km = 0.0;
  double origin_y_km = 4800.0;
  double spatial_range_km = 100.0;
  int n_informative = 5;
  int n_noise = 20;
  int n_redundant = 5;
  double noise_sd = 0.3;            // target noise, link scale
  double covariate_noise_sd = 0.1;  // white noise added to every covariate
  double latent_sd = 0.0;           // unobserved smooth field in the target
  TargetSkew target_skew = TargetSkew::lognormal;
  double target_scale = 15.0;  // lognormal: y = scale * exp(link_scale * eta)
  double link_scale = 0.35;
  int n_strata = 4;
  double stratum_effect_sd = 0.5;
  std::optional<SynthTrend> trend;
  bool nonlinear = true;
  bool smooth_noise_features = true;
  bool white_noise = false;  // no spatial structure anywhere
  int basis_functions = 64;
  std::string target_name = "SOC";
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct SynthTruth {
  std::vector<std::string> informative;
  std::vector<std::string> redundant;
  std::vector<std::string> noise;
  std::vector<double> coefficients;  // aligned with `informative`
  std::map<std::string, double> stratum_effects;
  std::map<std::string, std::string> superclass_of;
  std::vector<LatLon> stratum_centers;
};

struct SynthResult {
  Dataset dataset;
  SynthTruth truth;
  std::vector<double> link;  // noiseless link-scale signal per sample
};

/// Deterministic given the seed.
SynthResult generate(const SynthConfig& config);

/// Random-Fourier-feature field with Gaussian-like covariance of practical
/// range `range_km`, evaluated at projected points (km).
class SmoothField {
 public:
  SmoothField(double range_km, int basis_functions, Rng& rng);
  double operator()(double x_km, double y_km) const;

 private:
  std::vector<double> wx_;
  std::vector<double> wy_;
  std::vector<double> phase_;
  double amplitude_ = 0.0;
};

struct AutocorrelationCheck {
  double close_correlation = kNaN;  // pairs closer than range/2
  double far_correlation = kNaN;    // pairs farther than range
  double gap = kNaN;
  std::size_t close_pairs = 0;
  std::size_t far_pairs = 0;
};

/// Neighbour-pair correlation gap between close and distant sample pairs.
/// Needs at least 30 samples and 30 close pairs; a constant field throws.
AutocorrelationCheck spatial_autocorrelation_check(std::span<const LatLon> points, std::span<const double> values,
                                                   double range_km);

}  // namespace geoval
