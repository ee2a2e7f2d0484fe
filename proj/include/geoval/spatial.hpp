#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoval/data.hpp"

namespace geoval {

constexpr double kEarthRadiusKm = 6371.0;

/// Great-circle distance on a sphere of radius 6371 km.
double haversine_km(const LatLon& a, const LatLon& b);

/// Sinusoidal equal-area projection centred on the prime meridian, in km.
struct ProjectedPoint {
  double x_km = 0.0;
  double y_km = 0.0;
};
ProjectedPoint project_sinusoidal(const LatLon& p);
LatLon unproject_sinusoidal(const ProjectedPoint& p);

struct SpatialBlock {
  int block_id = 0;
  std::vector<std::size_t> members;  // record indices into the dataset
  std::vector<std::string> member_ids;
  LatLon centroid;
  long cell_x = 0;
  long cell_y = 0;

  std::size_t size() const noexcept { return members.size(); }
};

struct BlockingOptions {
  double block_km = 100.0;
  /// Grid origin offset in km; {0, 0} anchors the grid at (0°, 0°).
  double offset_x_km = 0.0;
  double offset_y_km = 0.0;
};

/// Random grid offset in [0, block_km) on both axes, for sensitivity runs.
BlockingOptions seeded_offset(double block_km, std::uint64_t seed);

/// Square grid cells of edge `block_km` in the sinusoidal projection. Block
/// ids follow first appearance in record order.
std::vector<SpatialBlock> assign_blocks(const Dataset& ds, const BlockingOptions& opts = {});
std::vector<SpatialBlock> assign_blocks(std::span<const LatLon> points, const BlockingOptions& opts = {});

/// Per-sample block index (position in the block vector).
std::vector<std::size_t> sample_block_index(const std::vector<SpatialBlock>& blocks, std::size_t n_samples);

struct NNDistanceReport {
  std::size_t n_test_blocks = 0;
  std::size_t n_train_blocks = 0;
  double mean_km = kNaN;
  double median_km = kNaN;
  double p95_km = kNaN;
  double min_km = kNaN;
  std::vector<double> distances_km;  // one per test block, in input order
};

enum class NNMode { centroid, member };

/// Distance from each test block to its nearest training block, aggregated.
/// Centroid mode compares block centroids; member mode takes the minimum over
/// member pairs (needs `points`).
NNDistanceReport nn_distance_report(std::span<const SpatialBlock* const> test_blocks,
                                    std::span<const SpatialBlock* const> train_blocks,
                                    NNMode mode = NNMode::centroid,
                                    std::span<const LatLon> points = {});

}  // namespace geoval
