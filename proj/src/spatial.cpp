#include "geoval/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace geoval {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

double haversine_km(const LatLon& a, const LatLon& b) {
  const double phi1 = a.lat * kDeg;
  const double phi2 = b.lat * kDeg;
  const double dphi = (b.lat - a.lat) * kDeg;
  const double dlambda = (b.lon - a.lon) * kDeg;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

ProjectedPoint project_sinusoidal(const LatLon& p) {
  const double phi = p.lat * kDeg;
  return {kEarthRadiusKm * p.lon * kDeg * std::cos(phi), kEarthRadiusKm * phi};
}

LatLon unproject_sinusoidal(const ProjectedPoint& p) {
  const double phi = p.y_km / kEarthRadiusKm;
  const double c = std::cos(phi);
  const double lambda = c > 1e-12 ? p.x_km / (kEarthRadiusKm * c) : 0.0;
  return {phi / kDeg, lambda / kDeg};
}

BlockingOptions seeded_offset(double block_km, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xB10C));
  BlockingOptions o;
  o.block_km = block_km;
  o.offset_x_km = rng.uniform(0.0, block_km);
  o.offset_y_km = rng.uniform(0.0, block_km);
  return o;
}

std::vector<SpatialBlock> assign_blocks(std::span<const LatLon> points, const BlockingOptions& opts) {
  if (!(opts.block_km > 0.0)) throw std::invalid_argument("block_km must be positive");
  std::map<std::pair<long, long>, std::size_t> cell_to_block;
  std::vector<SpatialBlock> blocks;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto q = project_sinusoidal(points[i]);
    const auto cx = static_cast<long>(std::floor((q.x_km - opts.offset_x_km) / opts.block_km));
    const auto cy = static_cast<long>(std::floor((q.y_km - opts.offset_y_km) / opts.block_km));
    auto [it, inserted] = cell_to_block.try_emplace({cx, cy}, blocks.size());
    if (inserted) {
      SpatialBlock b;
      b.block_id = static_cast<int>(blocks.size());
      b.cell_x = cx;
      b.cell_y = cy;
      blocks.push_back(std::move(b));
    }
    blocks[it->second].members.push_back(i);
  }
  for (auto& b : blocks) {
    double lat = 0.0;
    double lon = 0.0;
    for (auto m : b.members) {
      lat += points[m].lat;
      lon += points[m].lon;
    }
    const auto n = static_cast<double>(b.members.size());
    b.centroid = {lat / n, lon / n};
  }
  return blocks;
}

std::vector<SpatialBlock> assign_blocks(const Dataset& ds, const BlockingOptions& opts) {
  std::vector<LatLon> pts;
  pts.reserve(ds.size());
  for (const auto& r : ds.records) pts.push_back(r.location);
  auto blocks = assign_blocks(pts, opts);
  for (auto& b : blocks)
    for (auto m : b.members) b.member_ids.push_back(ds.records[m].id);
  return blocks;
}

std::vector<std::size_t> sample_block_index(const std::vector<SpatialBlock>& blocks, std::size_t n_samples) {
  std::vector<std::size_t> out(n_samples, static_cast<std::size_t>(-1));
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (auto m : blocks[b].members) {
      if (m >= n_samples) throw std::out_of_range("block member index beyond sample count");
      out[m] = b;
    }
  return out;
}

NNDistanceReport nn_distance_report(std::span<const SpatialBlock* const> test_blocks,
                                    std::span<const SpatialBlock* const> train_blocks, NNMode mode,
                                    std::span<const LatLon> points) {
  if (test_blocks.empty() || train_blocks.empty())
    throw std::invalid_argument("nearest-neighbour report needs non-empty test and training block sets");
  for (const auto* t : test_blocks)
    for (const auto* r : train_blocks)
      if (t->block_id == r->block_id)
        throw std::invalid_argument("block " + std::to_string(t->block_id) + " is in both test and training sets");
  if (mode == NNMode::member && points.empty())
    throw std::invalid_argument("member-mode distances need sample coordinates");

  NNDistanceReport rep;
  rep.n_test_blocks = test_blocks.size();
  rep.n_train_blocks = train_blocks.size();
  rep.distances_km.reserve(test_blocks.size());
  for (const auto* t : test_blocks) {
    double best = kInf;
    for (const auto* r : train_blocks) {
      if (mode == NNMode::centroid) {
        best = std::min(best, haversine_km(t->centroid, r->centroid));
      } else {
        for (auto i : t->members)
          for (auto j : r->members) best = std::min(best, haversine_km(points[i], points[j]));
      }
    }
    rep.distances_km.push_back(best);
  }
  std::vector<double> sorted = rep.distances_km;
  std::sort(sorted.begin(), sorted.end());
  rep.mean_km = mean(sorted);
  rep.median_km = quantile_sorted(sorted, 0.5);
  rep.p95_km = quantile_sorted(sorted, 0.95);
  rep.min_km = sorted.front();
  return rep;
}

}  // namespace geoval
