#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "fedfair/error.hpp"
#include "fedfair/format.hpp"
#include "fedfair/metrics.hpp"
#include "fedfair/network.hpp"

namespace fedfair {

struct VehicleRequest {
  std::uint64_t vehicle_id = 0;
  NodeIndex origin = 0;
  NodeIndex destination = 0;
  std::optional<std::array<double, 4>> preferences;  // carried, not consumed by default
};

struct Route {
  std::vector<EdgeId> edges;

  /// 16 hex digits of FNV-1a over the edge sequence.
  std::string id() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (EdgeId e : edges) {
      std::uint64_t x = e;
      for (int b = 0; b < 8; ++b) {
        h ^= (x & 0xffU);
        h *= 0x100000001b3ULL;
        x >>= 8;
      }
    }
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = digits[h & 0xfU];
    return s;
  }

  std::vector<NodeIndex> nodes(const RoadNetwork& net) const {
    std::vector<NodeIndex> out;
    if (edges.empty()) return out;
    out.push_back(net.edge(edges.front()).from);
    for (EdgeId e : edges) out.push_back(net.edge(e).to);
    return out;
  }

  bool operator==(const Route&) const = default;
};

inline double path_cost(const Route& r, std::span<const double> weights) {
  double c = 0.0;
  for (EdgeId e : r.edges) c += weights[e];
  return c;
}

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Cost-to-destination for every node on the graph with some nodes and
/// edges removed.
inline std::vector<double> distances_to(const RoadNetwork& net, NodeIndex target, std::span<const double> w,
                                        const std::vector<bool>& node_blocked, const std::vector<bool>& edge_blocked) {
  std::vector<double> dist(net.node_count(), kInf);
  using Item = std::pair<double, NodeIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[target] = 0.0;
  pq.push({0.0, target});
  while (!pq.empty()) {
    const auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    for (EdgeId eid : net.in_edges(v)) {
      if (edge_blocked[eid]) continue;
      const NodeIndex u = net.edge(eid).from;
      if (node_blocked[u]) continue;
      const double nd = d + w[eid];
      if (nd < dist[u]) {
        dist[u] = nd;
        pq.push({nd, u});
      }
    }
  }
  return dist;
}

/// Among minimum-cost paths from source to target, the one whose edge-id
/// sequence is lexicographically smallest.
inline std::optional<Route> lexmin_shortest(const RoadNetwork& net, NodeIndex source, NodeIndex target,
                                            std::span<const double> w, const std::vector<bool>& node_blocked,
                                            const std::vector<bool>& edge_blocked) {
  if (node_blocked[source] || node_blocked[target]) return std::nullopt;
  const auto dist = distances_to(net, target, w, node_blocked, edge_blocked);
  if (!std::isfinite(dist[source])) return std::nullopt;
  Route r;
  NodeIndex v = source;
  std::vector<bool> seen(net.node_count(), false);
  while (v != target) {
    seen[v] = true;
    std::optional<EdgeId> pick;
    for (EdgeId eid : net.out_edges(v)) {
      if (edge_blocked[eid]) continue;
      const NodeIndex u = net.edge(eid).to;
      if (node_blocked[u] || seen[u] || !std::isfinite(dist[u])) continue;
      const double via = w[eid] + dist[u];
      if (via <= dist[v] * (1.0 + 1e-12) && (!pick || eid < *pick)) pick = eid;
    }
    if (!pick) return std::nullopt;
    r.edges.push_back(*pick);
    v = net.edge(*pick).to;
  }
  return r;
}

inline void check_weights(const RoadNetwork& net, std::span<const double> w) {
  require(w.size() == net.edge_count(), ErrorCode::MissingPrediction, "edge weights must cover every edge");
  for (double x : w) require(x > 0.0 && std::isfinite(x), ErrorCode::NonPositiveWeight, "edge weights must be > 0");
}

}  // namespace detail

/// Single shortest path (lexicographically smallest edge sequence on ties).
inline std::optional<Route> shortest_path(const RoadNetwork& net, NodeIndex origin, NodeIndex destination,
                                          std::span<const double> weights) {
  detail::check_weights(net, weights);
  std::vector<bool> nodes(net.node_count(), false), edges(net.edge_count(), false);
  return detail::lexmin_shortest(net, origin, destination, weights, nodes, edges);
}

/// Yen's algorithm. Paths come out ordered by (cost, edge-id sequence).
inline std::vector<Route> k_shortest_paths(const RoadNetwork& net, NodeIndex origin, NodeIndex destination,
                                           std::size_t k, std::span<const double> weights) {
  require(origin < net.node_count() && destination < net.node_count(), ErrorCode::DanglingEdge,
          "origin or destination not in the network");
  require(k >= 1, ErrorCode::InvalidK, "k must be >= 1");
  require(origin != destination, ErrorCode::RangeViolation, "origin equals destination");
  detail::check_weights(net, weights);

  std::vector<Route> found;
  std::vector<bool> no_nodes(net.node_count(), false), no_edges(net.edge_count(), false);
  auto first = detail::lexmin_shortest(net, origin, destination, weights, no_nodes, no_edges);
  if (!first) return found;
  found.push_back(*first);

  struct Candidate {
    double cost;
    Route route;
    bool operator<(const Candidate& o) const {
      if (cost != o.cost) return cost < o.cost;
      return route.edges < o.route.edges;
    }
  };
  std::vector<Candidate> pool;
  auto known = [&](const Route& r) {
    for (const auto& f : found)
      if (f.edges == r.edges) return true;
    for (const auto& c : pool)
      if (c.route.edges == r.edges) return true;
    return false;
  };

  while (found.size() < k) {
    const Route& last = found.back();
    const auto last_nodes = last.nodes(net);
    for (std::size_t i = 0; i < last.edges.size(); ++i) {
      const NodeIndex spur = last_nodes[i];
      std::vector<bool> node_blocked(net.node_count(), false), edge_blocked(net.edge_count(), false);
      for (std::size_t j = 0; j < i; ++j) node_blocked[last_nodes[j]] = true;
      for (const auto& p : found) {
        if (p.edges.size() > i && std::equal(last.edges.begin(), last.edges.begin() + static_cast<std::ptrdiff_t>(i),
                                             p.edges.begin()))
          edge_blocked[p.edges[i]] = true;
      }
      auto tail = detail::lexmin_shortest(net, spur, destination, weights, node_blocked, edge_blocked);
      if (!tail) continue;
      Route cand;
      cand.edges.assign(last.edges.begin(), last.edges.begin() + static_cast<std::ptrdiff_t>(i));
      cand.edges.insert(cand.edges.end(), tail->edges.begin(), tail->edges.end());
      if (!known(cand)) pool.push_back({path_cost(cand, weights), std::move(cand)});
    }
    if (pool.empty()) break;
    auto best = std::min_element(pool.begin(), pool.end());
    found.push_back(std::move(best->route));
    pool.erase(best);
  }
  return found;
}

inline constexpr double kDiversityPenalty = 1.3;
inline constexpr std::size_t kDiversityPatience = 10;

/// Re-runs shortest path while inflating, each iteration, the weight of every
/// edge used by an accepted route by 1.3. Stops after `count` new routes or
/// after 10 iterations in a row that produce nothing new.
inline std::vector<Route> diverse_routes(const RoadNetwork& net, const VehicleRequest& request,
                                         std::span<const Route> base_routes, std::size_t count,
                                         std::span<const double> weights) {
  require(!base_routes.empty(), ErrorCode::NoCandidates, "diverse_routes needs at least one base route");
  detail::check_weights(net, weights);
  std::vector<Route> accepted(base_routes.begin(), base_routes.end());
  std::vector<Route> added;
  std::vector<double> w(weights.begin(), weights.end());
  std::size_t idle = 0;
  while (added.size() < count && idle < kDiversityPatience) {
    std::vector<bool> used(net.edge_count(), false);
    for (const auto& r : accepted)
      for (EdgeId e : r.edges) used[e] = true;
    for (EdgeId e = 0; e < w.size(); ++e)
      if (used[e]) w[e] *= kDiversityPenalty;
    auto r = shortest_path(net, request.origin, request.destination, w);
    if (!r) break;
    const bool seen = std::any_of(accepted.begin(), accepted.end(), [&](const Route& a) { return a == *r; });
    if (seen) {
      ++idle;
      continue;
    }
    idle = 0;
    accepted.push_back(*r);
    added.push_back(std::move(*r));
  }
  return added;
}

// ---------------------------------------------------------------------------
// Objectives

struct RouteObjectives {
  double travel_time = 0.0;   // minutes
  double spatial = 0.0;       // Gini delta
  double demographic = 0.0;
  double emissions = 0.0;     // grams

  std::array<double, 4> as_array() const { return {travel_time, spatial, demographic, emissions}; }
  bool operator==(const RouteObjectives&) const = default;
};

inline double route_travel_time(const Route& route, std::span<const double> predicted) {
  double t = 0.0;
  for (EdgeId e : route.edges) {
    require(e < predicted.size() && std::isfinite(predicted[e]), ErrorCode::MissingPrediction,
            "no prediction for edge " + std::to_string(e));
    t += predicted[e];
  }
  return t;
}

/// G(L with the route's flow added) - G(L). An all-zero load vector counts as
/// perfectly equal.
inline double spatial_impact(const Route& route, std::span<const double> flows, const RegionPartition& partition,
                             const RoadNetwork& net, double increment = 1.0) {
  const auto before = region_load(flows, partition, net);
  std::vector<double> after_flows(flows.begin(), flows.end());
  for (EdgeId e : route.edges) after_flows[e] += increment;
  const auto after = region_load(after_flows, partition, net);
  return gini_traffic(after) - gini_or_zero(before);
}

/// Sum over route edges of weight * vulnerability of the edge's tail node
/// times increment / capacity.
inline double demographic_impact(const Route& route, const SegmentDemographics& demo, const RoadNetwork& net,
                                 double increment = 1.0) {
  double s = 0.0;
  for (EdgeId e : route.edges) {
    const auto& edge = net.edge(e);
    require(edge.from < demo.weight.size() && edge.from < demo.vulnerability.size(), ErrorCode::MissingDemographics,
            "no demographics for node " + net.label(edge.from));
    s += demo.weight[edge.from] * demo.vulnerability[edge.from] * increment / edge.capacity;
  }
  return s;
}

inline constexpr double kEmissionGramsPerMile = 200.0;

inline double emissions_estimate(const Route& route, const TrafficState& state, const RoadNetwork& net) {
  double g = 0.0;
  for (EdgeId e : route.edges) {
    require(e < state.edges.size(), ErrorCode::MissingState, "no state for edge " + std::to_string(e));
    const auto& edge = net.edge(e);
    g += edge.distance_miles * kEmissionGramsPerMile * (state.edges[e].travel_time / edge.free_flow_time);
  }
  return g;
}

struct ObjectiveWeights {
  std::array<double, 4> beta{1.0, 1.0, 1.0, 1.0};
  double lambda = 0.5;
  double alpha_spatial = 1.0;
  double alpha_temporal = 0.0;
  double alpha_demographic = 1.0;
  std::function<double(std::size_t)> lambda_schedule;  // overrides `lambda` when set

  double lambda_at(std::size_t step) const { return lambda_schedule ? lambda_schedule(step) : lambda; }

  void validate() const {
    for (double b : beta) require(b >= 0.0 && std::isfinite(b), ErrorCode::NegativeWeight, "beta must be >= 0");
    require(lambda >= 0.0 && lambda <= 1.0, ErrorCode::LambdaOutOfRange, "lambda outside [0,1]");
    require(alpha_spatial >= 0.0 && alpha_temporal >= 0.0 && alpha_demographic >= 0.0, ErrorCode::NegativeWeight,
            "alpha weights must be >= 0");
  }
};

inline double route_utility(const RouteObjectives& o, const std::array<double, 4>& beta) {
  const auto v = o.as_array();
  double u = 0.0;
  for (std::size_t i = 0; i < 4; ++i) u += beta[i] * v[i];
  return u;
}

/// Objectives min-max normalized over the candidate set; a constant
/// objective maps to 0.
inline std::vector<RouteObjectives> normalize_objectives(std::span<const RouteObjectives> objs) {
  std::array<double, 4> lo, hi;
  lo.fill(detail::kInf);
  hi.fill(-detail::kInf);
  for (const auto& o : objs) {
    const auto v = o.as_array();
    for (std::size_t i = 0; i < 4; ++i) {
      lo[i] = std::min(lo[i], v[i]);
      hi[i] = std::max(hi[i], v[i]);
    }
  }
  std::vector<RouteObjectives> out;
  out.reserve(objs.size());
  for (const auto& o : objs) {
    auto v = o.as_array();
    for (std::size_t i = 0; i < 4; ++i) v[i] = hi[i] > lo[i] ? (v[i] - lo[i]) / (hi[i] - lo[i]) : 0.0;
    out.push_back({v[0], v[1], v[2], v[3]});
  }
  return out;
}

inline std::vector<double> route_utilities(std::span<const RouteObjectives> objs, const std::array<double, 4>& beta,
                                           bool normalize) {
  std::vector<RouteObjectives> use = normalize ? normalize_objectives(objs)
                                               : std::vector<RouteObjectives>(objs.begin(), objs.end());
  std::vector<double> u;
  for (const auto& o : use) u.push_back(route_utility(o, beta));
  return u;
}

/// lambda f_time + (1 - lambda) f_fairness
inline double scalarize(double time_objective, double fairness_objective, double lambda) {
  require(lambda >= 0.0 && lambda <= 1.0, ErrorCode::LambdaOutOfRange, "lambda outside [0,1]");
  if (lambda == 1.0) return time_objective;
  if (lambda == 0.0) return fairness_objective;
  return lambda * time_objective + (1.0 - lambda) * fairness_objective;
}

/// alpha_s spatial + alpha_d demographic (the temporal term is a property of
/// a whole horizon, not of a single route, and enters as 0 here).
inline double route_fairness(const RouteObjectives& o, const ObjectiveWeights& w) {
  return w.alpha_spatial * o.spatial + w.alpha_demographic * o.demographic;
}

struct RouteCandidate {
  Route route;
  RouteObjectives objectives;
};

namespace detail {

inline bool tie_break_less(const RouteCandidate& a, const RouteCandidate& b) {
  if (a.objectives.travel_time != b.objectives.travel_time)
    return a.objectives.travel_time < b.objectives.travel_time;
  return a.route.id() < b.route.id();
}

}  // namespace detail

/// Candidate indices ordered by scalarize(T, fairness, lambda); ties by
/// travel time, then route id.
inline std::vector<std::size_t> scalarized_ranking(std::span<const RouteCandidate> cands, const ObjectiveWeights& w,
                                                   std::size_t step = 0) {
  const double lambda = w.lambda_at(step);
  std::vector<double> score;
  for (const auto& c : cands) score.push_back(scalarize(c.objectives.travel_time, route_fairness(c.objectives, w), lambda));
  std::vector<std::size_t> idx(cands.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] < score[b];
    return detail::tie_break_less(cands[a], cands[b]);
  });
  return idx;
}

/// a <= b in every objective and < in at least one.
inline bool dominates(const RouteObjectives& a, const RouteObjectives& b) {
  const auto x = a.as_array(), y = b.as_array();
  bool strict = false;
  for (std::size_t i = 0; i < 4; ++i) {
    if (x[i] > y[i]) return false;
    if (x[i] < y[i]) strict = true;
  }
  return strict;
}

struct ParetoContext {
  std::array<double, 4> ideal{};  // component-wise minimum of the raw objectives
  std::array<double, 4> lo{}, hi{};
};

inline ParetoContext pareto_context(std::span<const RouteCandidate> cands) {
  ParetoContext ctx;
  ctx.lo.fill(detail::kInf);
  ctx.hi.fill(-detail::kInf);
  for (const auto& c : cands) {
    const auto v = c.objectives.as_array();
    for (std::size_t i = 0; i < 4; ++i) {
      ctx.lo[i] = std::min(ctx.lo[i], v[i]);
      ctx.hi[i] = std::max(ctx.hi[i], v[i]);
    }
  }
  ctx.ideal = ctx.lo;
  return ctx;
}

/// Per-objective weights of the distance to the ideal point: time and
/// emissions carry lambda, the two fairness terms carry 1 - lambda.
inline std::array<double, 4> distance_weights(const ObjectiveWeights& w, std::size_t step = 0) {
  const double l = w.lambda_at(step);
  std::array<double, 4> d{l * w.beta[0], (1.0 - l) * w.beta[1], (1.0 - l) * w.beta[2], l * w.beta[3]};
  if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) d.fill(1.0);
  return d;
}

/// Index of the non-dominated candidate closest to the ideal point in
/// min-max normalized space; ties by travel time, then route id.
inline std::size_t pareto_select(std::span<const RouteCandidate> cands, const ParetoContext& ctx,
                                 const std::array<double, 4>& dist_weights) {
  require(!cands.empty(), ErrorCode::NoCandidates, "no candidate routes");
  std::optional<std::size_t> best;
  double best_d = detail::kInf;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < cands.size() && !dominated; ++j)
      dominated = j != i && dominates(cands[j].objectives, cands[i].objectives);
    if (dominated) continue;
    const auto v = cands[i].objectives.as_array();
    double d = 0.0;
    for (std::size_t m = 0; m < 4; ++m) {
      const double range = ctx.hi[m] - ctx.lo[m];
      if (range <= 0.0) continue;
      const double z = (v[m] - ctx.ideal[m]) / range;
      d += dist_weights[m] * z * z;
    }
    d = std::sqrt(d);
    if (!best || d < best_d || (d == best_d && detail::tie_break_less(cands[i], cands[*best]))) {
      best = i;
      best_d = d;
    }
  }
  return *best;
}

inline std::size_t pareto_select(std::span<const RouteCandidate> cands, const ObjectiveWeights& w,
                                 std::size_t step = 0) {
  return pareto_select(cands, pareto_context(cands), distance_weights(w, step));
}

// ---------------------------------------------------------------------------
// Assignment

struct AssignOptions {
  std::size_t k = 3;
  std::size_t diverse = 2;
  double flow_increment = 1.0;  // vehicles/hour added per assigned vehicle
  bool update_state = true;
  std::size_t step = 0;         // passed to the lambda schedule
  // Recomputes an edge's travel time from its flow after an update; unset
  // leaves travel times alone.
  std::function<double(const Edge&, double)> congestion;
};

struct Assignment {
  std::uint64_t vehicle_id = 0;
  std::optional<Route> route;  // empty when the destination is unreachable
  RouteObjectives objectives;
  std::size_t candidates = 0;
};

struct AssignmentResult {
  std::vector<Assignment> assignments;
  TrafficState state;
  std::size_t unreachable = 0;
};

/// Algorithm 2: requests in ascending vehicle id; candidates from Yen plus
/// diversity search; objectives against the state as updated by every
/// earlier assignment; Pareto choice; then the chosen route's flow is added.
inline AssignmentResult assign_routes(const RoadNetwork& net, const RegionPartition& partition,
                                      const SegmentDemographics& demo, std::span<const VehicleRequest> requests,
                                      const TrafficState& state, std::span<const double> predicted,
                                      const ObjectiveWeights& weights, const AssignOptions& opts = {}) {
  weights.validate();
  detail::check_weights(net, predicted);
  require(state.edges.size() == net.edge_count(), ErrorCode::MissingState, "state must cover every edge");
  for (const auto& r : requests)
    require(r.origin < net.node_count() && r.destination < net.node_count() && r.origin != r.destination,
            ErrorCode::RangeViolation, "invalid request for vehicle " + std::to_string(r.vehicle_id));

  std::vector<VehicleRequest> ordered(requests.begin(), requests.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const VehicleRequest& a, const VehicleRequest& b) { return a.vehicle_id < b.vehicle_id; });

  AssignmentResult out;
  out.state = state;
  std::vector<double> flows = state.flows();
  const auto dist_w = distance_weights(weights, opts.step);
  for (const auto& req : ordered) {
    Assignment a;
    a.vehicle_id = req.vehicle_id;
    auto base = k_shortest_paths(net, req.origin, req.destination, opts.k, predicted);
    if (base.empty()) {
      ++out.unreachable;
      out.assignments.push_back(std::move(a));
      continue;
    }
    auto extra = opts.diverse > 0 ? diverse_routes(net, req, base, opts.diverse, predicted) : std::vector<Route>{};
    std::vector<RouteCandidate> cands;
    for (auto* list : {&base, &extra})
      for (auto& r : *list) {
        RouteCandidate c;
        c.objectives.travel_time = route_travel_time(r, predicted);
        c.objectives.spatial = spatial_impact(r, flows, partition, net, opts.flow_increment);
        c.objectives.demographic = demographic_impact(r, demo, net, opts.flow_increment);
        c.objectives.emissions = emissions_estimate(r, out.state, net);
        c.route = std::move(r);
        cands.push_back(std::move(c));
      }
    const std::size_t pick = pareto_select(cands, pareto_context(cands), dist_w);
    a.route = cands[pick].route;
    a.objectives = cands[pick].objectives;
    a.candidates = cands.size();
    if (opts.update_state) {
      for (EdgeId e : a.route->edges) {
        flows[e] += opts.flow_increment;
        auto& es = out.state.edges[e];
        es.flow = flows[e];
        es.density = es.flow / net.edge(e).capacity;
        if (opts.congestion) {
          es.travel_time = opts.congestion(net.edge(e), es.flow);
          es.speed_mph = net.edge(e).distance_miles / es.travel_time * 60.0;
        }
      }
    }
    out.assignments.push_back(std::move(a));
  }
  return out;
}

inline std::string assignment_csv_header() {
  return "vehicle_id,route_edges,travel_time_min,gini_delta,demo_impact,emissions_g";
}

inline std::string assignment_csv_row(const Assignment& a) {
  std::string s = std::to_string(a.vehicle_id) + ",";
  if (!a.route) return s + ",,,,";
  for (std::size_t i = 0; i < a.route->edges.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(a.route->edges[i]);
  }
  const auto& o = a.objectives;
  s += "," + format_number(o.travel_time) + "," + format_number(o.spatial) + "," + format_number(o.demographic) + "," +
       format_number(o.emissions);
  return s;
}

inline void write_assignments_csv(std::span<const Assignment> rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path);
  out << assignment_csv_header() << '\n';
  for (const auto& a : rows) out << assignment_csv_row(a) << '\n';
}

}  // namespace fedfair
