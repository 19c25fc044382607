#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <tuple>
#include <vector>

#include "fedfair/network.hpp"
#include "fedfair/rng.hpp"

namespace fedfair::fixtures {

inline constexpr std::size_t kMetrSensors = 207;
inline constexpr std::size_t kMetrAdjacencies = 3661;
inline constexpr std::array<std::size_t, 6> kMetrRegionSizes{41, 39, 36, 35, 31, 25};

struct SensorLayout {
  std::vector<std::string> ids;
  std::vector<double> x, y;  // miles
};

inline SensorLayout metr_layout(std::uint64_t seed) {
  SensorLayout s;
  Rng rng(derive_seed(seed, {0x6d6c}));
  for (std::size_t i = 0; i < kMetrSensors; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%03zu", i);
    s.ids.emplace_back(buf);
    s.x.push_back(rng.uniform(0.0, 30.0));
    s.y.push_back(rng.uniform(0.0, 20.0));
  }
  return s;
}

/// Sensor distance list shaped like METR-LA: 207 sensors, the 3661 closest
/// pairs kept as undirected adjacencies.
inline std::vector<TopologyRow> metr_topology(std::uint64_t seed = 0) {
  const auto s = metr_layout(seed);
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < kMetrSensors; ++i)
    for (std::size_t j = i + 1; j < kMetrSensors; ++j)
      pairs.emplace_back(std::hypot(s.x[i] - s.x[j], s.y[i] - s.y[j]), i, j);
  std::sort(pairs.begin(), pairs.end());
  pairs.resize(kMetrAdjacencies);
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return std::tie(std::get<1>(a), std::get<2>(a)) <
                                                      std::tie(std::get<1>(b), std::get<2>(b)); });
  std::vector<TopologyRow> rows;
  rows.reserve(pairs.size());
  for (const auto& [d, i, j] : pairs) rows.push_back({s.ids[i], s.ids[j], std::max(d, 0.01)});
  return rows;
}

/// Six west-to-east bands of 41, 39, 36, 35, 31 and 25 sensors with seeded
/// vulnerability scores.
inline std::vector<RegionRow> metr_regions(std::uint64_t seed = 0) {
  const auto s = metr_layout(seed);
  std::vector<std::size_t> order(kMetrSensors);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
  Rng rng(derive_seed(seed, {0x7267}));
  std::vector<RegionRow> rows(kMetrSensors);
  std::size_t pos = 0;
  for (RegionId r = 0; r < kMetrRegionSizes.size(); ++r) {
    const double base = rng.uniform(0.1, 0.9);
    for (std::size_t k = 0; k < kMetrRegionSizes[r]; ++k, ++pos) {
      const std::size_t i = order[pos];
      rows[i] = {s.ids[i], r, std::clamp(base + rng.uniform(-0.1, 0.1), 0.0, 1.0), 1.0};
    }
  }
  return rows;
}

struct GridFixture {
  RoadNetwork net;
  RegionPartition partition;
  SegmentDemographics demographics;
};

inline constexpr std::size_t kGridRows = 4;
inline constexpr std::size_t kGridCols = 5;

/// 4 x 5 street grid, two-way links of 0.4-1.2 miles at 30 mph with
/// capacities of 120-200 vehicles/hour.
inline RoadNetwork grid_network(std::uint64_t seed = 0) {
  Rng rng(derive_seed(seed, {0x6772}));
  std::vector<std::string> nodes;
  for (std::size_t r = 0; r < kGridRows; ++r)
    for (std::size_t c = 0; c < kGridCols; ++c) nodes.push_back("g" + std::to_string(r) + "_" + std::to_string(c));
  std::vector<EdgeSpec> edges;
  auto link = [&](std::size_t a, std::size_t b) {
    const double miles = rng.uniform(0.4, 1.2);
    const double capacity = std::round(rng.uniform(120.0, 200.0));
    const double fft = miles / 30.0 * 60.0;
    edges.push_back({nodes[a], nodes[b], fft, capacity, miles, 30.0, {}});
    edges.push_back({nodes[b], nodes[a], fft, capacity, miles, 30.0, {}});
  };
  for (std::size_t r = 0; r < kGridRows; ++r)
    for (std::size_t c = 0; c < kGridCols; ++c) {
      const std::size_t v = r * kGridCols + c;
      if (c + 1 < kGridCols) link(v, v + 1);
      if (r + 1 < kGridRows) link(v, v + kGridCols);
    }
  return build_network(nodes, edges);
}

/// Splits the grid column by column into `regions` contiguous blocks of
/// near-equal size.
inline RegionPartition grid_partition(const RoadNetwork& net, std::size_t regions) {
  require(regions >= 1 && regions <= net.node_count(), ErrorCode::RangeViolation,
          "grid region count must be in [1, node count]");
  std::vector<RegionId> region_of(net.node_count());
  std::size_t pos = 0;
  const std::size_t n = net.node_count();
  for (std::size_t c = 0; c < kGridCols; ++c)
    for (std::size_t r = 0; r < kGridRows; ++r, ++pos) region_of[r * kGridCols + c] = pos * regions / n;
  return assign_regions(net, region_of);
}

inline GridFixture grid_fixture(std::size_t regions, std::uint64_t seed = 0) {
  GridFixture f{grid_network(seed), {}, {}};
  f.partition = grid_partition(f.net, regions);
  Rng rng(derive_seed(seed, {0x7675}));
  f.demographics = SegmentDemographics::uniform(f.net.node_count());
  for (auto& v : f.demographics.vulnerability) v = rng.uniform(0.0, 1.0);
  return f;
}

}  // namespace fedfair::fixtures
