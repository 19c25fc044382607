#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <span>
#include <vector>

#include "fedfair/error.hpp"
#include "fedfair/network.hpp"

namespace fedfair {

/// Per-region load ratio: mean of flow/capacity over the edges owned by the region.
using LoadVector = std::vector<double>;

inline LoadVector region_load(std::span<const double> flows, const RegionPartition& partition,
                              const RoadNetwork& net) {
  require(flows.size() == net.edge_count(), ErrorCode::MissingState, "flow vector must cover every edge");
  LoadVector sum(partition.region_count(), 0.0);
  std::vector<std::size_t> count(partition.region_count(), 0);
  for (const auto& e : net.edges()) {
    const RegionId r = partition.region_of(e.from);
    sum[r] += flows[e.id] / e.capacity;
    ++count[r];
  }
  for (RegionId r = 0; r < sum.size(); ++r) {
    require(count[r] > 0, ErrorCode::EmptyRegion, "region " + std::to_string(r) + " owns no edges");
    sum[r] /= static_cast<double>(count[r]);
  }
  return sum;
}

inline LoadVector region_load(const TrafficState& state, const RegionPartition& partition, const RoadNetwork& net) {
  const auto flows = state.flows();
  return region_load(std::span<const double>(flows), partition, net);
}

/// Gini coefficient of regional loads. The ordered-pair double sum is
/// evaluated through the sorted form sum_i (2i - K + 1) L_(i), which equals
/// half of it.
inline double gini_traffic(std::span<const double> loads) {
  const std::size_t k = loads.size();
  require(k >= 2, ErrorCode::SingleRegion, "Gini needs at least two regions");
  double total = 0.0;
  for (double x : loads) {
    require(x >= 0.0 && std::isfinite(x), ErrorCode::RangeViolation, "loads must be finite and non-negative");
    total += x;
  }
  const double kd = static_cast<double>(k);
  const double mean = total / kd;
  require(mean > 0.0, ErrorCode::ZeroMeanLoad, "mean load is zero");
  std::vector<double> sorted(loads.begin(), loads.end());
  std::sort(sorted.begin(), sorted.end());
  double half_pair_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) half_pair_sum += (2.0 * static_cast<double>(i) - kd + 1.0) * sorted[i];
  return 2.0 * half_pair_sum / (2.0 * kd * kd * mean);
}

/// Gini with the degenerate all-zero vector mapped to 0 (perfect equality).
inline double gini_or_zero(std::span<const double> loads) {
  const bool any = std::any_of(loads.begin(), loads.end(), [](double x) { return x > 0.0; });
  return any ? gini_traffic(loads) : 0.0;
}

struct TemporalOptions {
  bool strict = false;  // all-zero weights raise instead of returning 0
};

inline double gini_temporal(std::span<const double> series, std::span<const double> weights,
                            const TemporalOptions& opts = {}) {
  require(series.size() == weights.size(), ErrorCode::LengthMismatch, "series and weights differ in length");
  require(!series.empty(), ErrorCode::LengthMismatch, "empty series");
  bool any = false;
  double acc = 0.0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    require(weights[t] >= 0.0, ErrorCode::NegativeWeight, "temporal weights must be non-negative");
    any = any || weights[t] > 0.0;
    acc += weights[t] * series[t];
  }
  if (!any && opts.strict) fail(ErrorCode::AllZero, "temporal weights are all zero");
  return acc / static_cast<double>(series.size());
}

inline double jain_index(std::span<const double> loads) {
  double sum = 0.0, sq = 0.0;
  for (double x : loads) {
    require(x >= 0.0, ErrorCode::RangeViolation, "loads must be non-negative");
    sum += x;
    sq += x * x;
  }
  require(sq > 0.0, ErrorCode::AllZero, "Jain's index undefined for all-zero loads");
  return sum * sum / (static_cast<double>(loads.size()) * sq);
}

struct FairnessWeights {
  double spatial = 1.0;
  double temporal = 0.0;
  double demographic = 0.0;
};

inline double combined_fairness(double spatial, double temporal, double demographic, const FairnessWeights& w) {
  require(w.spatial >= 0.0 && w.temporal >= 0.0 && w.demographic >= 0.0, ErrorCode::NegativeWeight,
          "fairness weights must be non-negative");
  return w.spatial * spatial + w.temporal * temporal + w.demographic * demographic;
}

/// Fairness score reported alongside raw Gini; higher is fairer.
inline double fairness_score(double gini) { return 1.0 - gini; }

/// Demographic aggregate over a set of assigned routes: the per-route impacts
/// averaged over the route count (each impact is already weight-scaled).
inline double demographic_aggregate(std::span<const double> route_impacts) {
  if (route_impacts.empty()) return 0.0;
  return std::accumulate(route_impacts.begin(), route_impacts.end(), 0.0) /
         static_cast<double>(route_impacts.size());
}

}  // namespace fedfair
