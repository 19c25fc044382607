#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "fedfair/routing.hpp"
#include "test_support.hpp"

using namespace fedfair;
using fedfair::testing::diamond;
using fedfair::testing::path_graph;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an exception";
  return ErrorCode::Io;
}

std::vector<double> fft_weights(const RoadNetwork& net) {
  std::vector<double> w;
  for (const auto& e : net.edges()) w.push_back(e.free_flow_time);
  return w;
}

struct Path {
  double cost;
  std::vector<EdgeId> edges;
  bool operator<(const Path& o) const { return cost != o.cost ? cost < o.cost : edges < o.edges; }
};

// Every simple path by depth-first search.
void enumerate(const RoadNetwork& net, NodeIndex v, NodeIndex t, std::span<const double> w, std::vector<bool>& on,
               std::vector<EdgeId>& stack, std::vector<Path>& out) {
  if (v == t) {
    double c = 0.0;
    for (EdgeId e : stack) c += w[e];
    out.push_back({c, stack});
    return;
  }
  on[v] = true;
  for (EdgeId e : net.out_edges(v)) {
    const NodeIndex u = net.edge(e).to;
    if (on[u]) continue;
    stack.push_back(e);
    enumerate(net, u, t, w, on, stack, out);
    stack.pop_back();
  }
  on[v] = false;
}

std::vector<Path> all_simple_paths(const RoadNetwork& net, NodeIndex s, NodeIndex t, std::span<const double> w) {
  std::vector<Path> out;
  std::vector<bool> on(net.node_count(), false);
  std::vector<EdgeId> stack;
  enumerate(net, s, t, w, on, stack, out);
  std::sort(out.begin(), out.end());
  return out;
}

// Bellman-Ford distance, independent of the Dijkstra inside the library.
double bellman_ford(const RoadNetwork& net, NodeIndex s, NodeIndex t, std::span<const double> w) {
  std::vector<double> d(net.node_count(), std::numeric_limits<double>::infinity());
  d[s] = 0.0;
  for (std::size_t it = 0; it < net.node_count(); ++it)
    for (const auto& e : net.edges()) d[e.to] = std::min(d[e.to], d[e.from] + w[e.id]);
  return d[t];
}

RoadNetwork random_digraph(Rng& rng, std::size_t n, double p, std::vector<double>& weights, bool integer) {
  std::vector<std::string> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back("v" + std::to_string(i));
  std::vector<EdgeSpec> edges;
  weights.clear();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && rng.uniform() < p) {
        const double w = integer ? static_cast<double>(1 + rng.below(4)) : rng.uniform(0.5, 5.0);
        edges.push_back({nodes[i], nodes[j], w, 100.0, 0.0, 60.0, {}});
        weights.push_back(w);
      }
  return build_network(nodes, edges);
}

// Two regions: {a, b} own a->b, b->a, b->c; {c, d} own c->d, d->c, c->b.
RoadNetwork two_region_net() {
  std::vector<std::string> nodes{"a", "b", "c", "d"};
  std::vector<EdgeSpec> edges{
      {"a", "b", 1.0, 100.0, 0.0, 60.0, {}}, {"b", "a", 1.0, 100.0, 0.0, 60.0, {}},
      {"b", "c", 1.0, 100.0, 0.0, 60.0, {}}, {"c", "d", 1.0, 100.0, 0.0, 60.0, {}},
      {"d", "c", 1.0, 100.0, 0.0, 60.0, {}}, {"c", "b", 1.0, 100.0, 0.0, 60.0, {}},
  };
  return build_network(nodes, edges);
}

double brute_gini(const std::vector<double>& x) {
  double s = 0.0, m = 0.0;
  for (double a : x) {
    m += a;
    for (double b : x) s += std::abs(a - b);
  }
  m /= static_cast<double>(x.size());
  return s / (2.0 * static_cast<double>(x.size() * x.size()) * m);
}

}  // namespace

TEST(KShortest, DiamondBothPathsInOrder) {
  const auto net = diamond();
  const auto w = fft_weights(net);
  const auto paths = k_shortest_paths(net, net.index_of("O"), net.index_of("D"), 2, w);
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(path_cost(paths[0], w), 3.0);
  EXPECT_EQ(path_cost(paths[1], w), 5.0);
  EXPECT_EQ(k_shortest_paths(net, net.index_of("O"), net.index_of("D"), 10, w).size(), 2u);
}

TEST(KShortest, KOneMatchesBellmanFord) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> w;
    const auto net = random_digraph(rng, 3 + rng.below(8), 0.35, w, false);
    const NodeIndex s = 0, t = net.node_count() - 1;
    if (net.edge_count() == 0) continue;
    const auto p = k_shortest_paths(net, s, t, 1, w);
    const double oracle = bellman_ford(net, s, t, w);
    if (!std::isfinite(oracle)) {
      EXPECT_TRUE(p.empty());
      continue;
    }
    ASSERT_EQ(p.size(), 1u);
    EXPECT_NEAR(path_cost(p[0], w), oracle, 1e-12);
  }
}

TEST(KShortest, DisconnectedIsEmpty) {
  std::vector<std::string> nodes{"a", "b", "c"};
  std::vector<EdgeSpec> edges{{"a", "b", 1.0, 10.0, 0.0, 60.0, {}}};
  const auto net = build_network(nodes, edges);
  EXPECT_TRUE(k_shortest_paths(net, 0, 2, 3, fft_weights(net)).empty());
}

TEST(KShortest, EqualsExhaustiveEnumeration) {
  Rng rng(17);
  int compared = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> w;
    const std::size_t n = 2 + rng.below(7);  // up to 8 nodes
    const auto net = random_digraph(rng, n, rng.uniform(0.2, 0.6), w, trial % 2 == 0);
    if (net.edge_count() == 0) continue;
    const NodeIndex s = rng.below(n);
    NodeIndex t = rng.below(n);
    if (s == t) t = (t + 1) % n;
    const auto oracle = all_simple_paths(net, s, t, w);
    for (std::size_t k : {1u, 2u, 3u, 5u, 8u}) {
      const auto got = k_shortest_paths(net, s, t, k, w);
      ASSERT_EQ(got.size(), std::min(k, oracle.size()));
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].edges, oracle[i].edges) << "trial " << trial << " k " << k << " rank " << i;
        const auto nodes = got[i].nodes(net);
        EXPECT_EQ(std::set<NodeIndex>(nodes.begin(), nodes.end()).size(), nodes.size());
      }
      ++compared;
    }
  }
  EXPECT_GT(compared, 500);
}

TEST(KShortest, RejectsBadInput) {
  const auto net = diamond();
  const auto w = fft_weights(net);
  EXPECT_EQ(code_of([&] { k_shortest_paths(net, 0, 3, 0, w); }), ErrorCode::InvalidK);
  std::vector<double> bad(w.size(), 0.0);
  EXPECT_EQ(code_of([&] { k_shortest_paths(net, 0, 3, 1, bad); }), ErrorCode::NonPositiveWeight);
}

TEST(DiverseRoutes, SinglePathGraphGivesNothing) {
  const auto net = path_graph(4);
  const auto w = fft_weights(net);
  VehicleRequest req{1, 0, 3, {}};
  const auto base = k_shortest_paths(net, 0, 3, 1, w);
  EXPECT_TRUE(diverse_routes(net, req, base, 3, w).empty());
}

TEST(DiverseRoutes, DiamondReturnsTheOtherPath) {
  const auto net = diamond();
  const auto w = fft_weights(net);
  VehicleRequest req{1, net.index_of("O"), net.index_of("D"), {}};
  const auto base = k_shortest_paths(net, req.origin, req.destination, 1, w);
  const auto extra = diverse_routes(net, req, base, 2, w);
  ASSERT_EQ(extra.size(), 1u);
  EXPECT_EQ(path_cost(extra[0], w), 5.0);
}

TEST(DiverseRoutes, DistinctIds) {
  std::vector<std::string> nodes;
  for (int i = 0; i < 12; ++i) nodes.push_back("g" + std::to_string(i));
  std::vector<EdgeSpec> edges;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) {
      const int v = r * 4 + c;
      if (c < 3) edges.push_back({nodes[v], nodes[v + 1], 1.0 + 0.1 * v, 100.0, 0.0, 60.0, {}});
      if (r < 2) edges.push_back({nodes[v], nodes[v + 4], 1.0 + 0.05 * v, 100.0, 0.0, 60.0, {}});
    }
  const auto net = build_network(nodes, edges);
  const auto w = fft_weights(net);
  VehicleRequest req{1, 0, 11, {}};
  const auto base = k_shortest_paths(net, 0, 11, 2, w);
  const auto extra = diverse_routes(net, req, base, 4, w);
  std::set<std::string> ids;
  for (const auto& r : base) ids.insert(r.id());
  for (const auto& r : extra) EXPECT_TRUE(ids.insert(r.id()).second);
  EXPECT_GE(extra.size(), 1u);
}

TEST(RouteTravelTime, Sums) {
  std::vector<double> pred{2.0, 3.0, 4.0, 9.5};
  EXPECT_EQ(route_travel_time(Route{{0, 1, 2}}, pred), 9.0);
  EXPECT_EQ(route_travel_time(Route{}, pred), 0.0);
  EXPECT_EQ(route_travel_time(Route{{3}}, pred), 9.5);
  EXPECT_EQ(code_of([&] { route_travel_time(Route{{4}}, pred); }), ErrorCode::MissingPrediction);
}

TEST(SpatialImpact, LeastLoadedRegionLowersGini) {
  const auto net = two_region_net();
  const auto part = assign_regions(net, std::vector<RegionId>{0, 0, 1, 1});
  std::vector<double> flows{30, 30, 0, 10, 10, 0};  // region 0 heavier
  const Route in_region1{{3}};                       // c->d
  const double delta = spatial_impact(in_region1, flows, part, net, 5.0);
  // brute force on region loads
  std::vector<double> before{60.0 / 300.0, 20.0 / 300.0}, after{60.0 / 300.0, 25.0 / 300.0};
  EXPECT_NEAR(delta, brute_gini(after) - brute_gini(before), 1e-12);
  EXPECT_LT(delta, 0.0);

  const Route in_region0{{0}};
  const double up = spatial_impact(in_region0, flows, part, net, 5.0);
  EXPECT_NEAR(up, brute_gini({65.0 / 300.0, 20.0 / 300.0}) - brute_gini(before), 1e-12);
  EXPECT_GT(up, 0.0);
}

TEST(SpatialImpact, SymmetricAdditionIsNeutral) {
  const auto net = two_region_net();
  const auto part = assign_regions(net, std::vector<RegionId>{0, 0, 1, 1});
  std::vector<double> flows{10, 20, 5, 10, 20, 5};
  const Route balanced{{1, 4}};  // b->a and d->c: one edge in each region
  EXPECT_NEAR(spatial_impact(balanced, flows, part, net), 0.0, 1e-12);
}

TEST(DemographicImpact, Examples) {
  const auto net = path_graph(3);  // edge 0 is n0 -> n1, capacity 100
  auto demo = SegmentDemographics::uniform(3, 2.0, 0.0);
  EXPECT_EQ(demographic_impact(Route{{0, 2}}, demo, net, 10.0), 0.0);
  demo.vulnerability = {0.5, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(demographic_impact(Route{{0}}, demo, net, 10.0), 0.1);
  const double base = demographic_impact(Route{{0, 2}}, demo, net, 3.0);
  for (auto& w : demo.weight) w *= 2.0;
  EXPECT_DOUBLE_EQ(demographic_impact(Route{{0, 2}}, demo, net, 3.0), 2.0 * base);
  SegmentDemographics short_demo{{1.0}, {1.0}};
  EXPECT_EQ(code_of([&] { demographic_impact(Route{{2}}, short_demo, net); }), ErrorCode::MissingDemographics);
}

TEST(Emissions, Examples) {
  std::vector<std::string> nodes{"a", "b"};
  std::vector<EdgeSpec> edges{{"a", "b", 1.0, 100.0, 1.0, 60.0, {}}};
  const auto net = build_network(nodes, edges);
  auto state = free_flow_state(net);
  EXPECT_DOUBLE_EQ(emissions_estimate(Route{{0}}, state, net), 200.0);
  state.edges[0].travel_time = 2.0;
  EXPECT_DOUBLE_EQ(emissions_estimate(Route{{0}}, state, net), 400.0);
  EXPECT_EQ(emissions_estimate(Route{}, state, net), 0.0);
  TrafficState empty;
  EXPECT_EQ(code_of([&] { emissions_estimate(Route{{0}}, empty, net); }), ErrorCode::MissingState);
}

TEST(RouteUtility, Examples) {
  RouteObjectives o{10.0, 0.2, 0.7, 300.0};
  EXPECT_EQ(route_utility(o, {1, 0, 0, 0}), 10.0);
  EXPECT_DOUBLE_EQ(route_utility(o, {0.5, 0.5, 0, 0}), 5.1);
  EXPECT_EQ(route_utility(o, {0, 0, 0, 0}), 0.0);
  std::vector<RouteObjectives> set{o, {20.0, 0.0, 0.7, 100.0}};
  const auto u = route_utilities(set, {1, 1, 1, 1}, true);
  EXPECT_DOUBLE_EQ(u[0], 0.0 + 1.0 + 0.0 + 1.0);
  EXPECT_DOUBLE_EQ(u[1], 1.0 + 0.0 + 0.0 + 0.0);
}

TEST(Scalarize, Examples) {
  EXPECT_EQ(scalarize(8.0, 0.4, 1.0), 8.0);
  EXPECT_EQ(scalarize(8.0, 0.4, 0.0), 0.4);
  EXPECT_DOUBLE_EQ(scalarize(8.0, 0.4, 0.25), 2.3);
  EXPECT_EQ(code_of([] { scalarize(1.0, 1.0, 1.5); }), ErrorCode::LambdaOutOfRange);
}

namespace {

RouteCandidate cand(std::vector<EdgeId> edges, RouteObjectives o) { return {Route{std::move(edges)}, o}; }

std::vector<RouteCandidate> random_candidates(Rng& rng, std::size_t n) {
  std::vector<RouteCandidate> c;
  for (std::size_t i = 0; i < n; ++i) {
    RouteObjectives o{rng.uniform(1, 30), rng.uniform(-0.3, 0.3), rng.uniform(0, 1), rng.uniform(100, 900)};
    // occasionally duplicate a coordinate so ties and dominance appear
    if (i > 0 && rng.uniform() < 0.3) o.travel_time = c[0].objectives.travel_time;
    c.push_back(cand({i, i + 100}, o));
  }
  return c;
}

}  // namespace

TEST(ParetoSelect, SingleCandidate) {
  std::vector<RouteCandidate> c{cand({1}, {5, 0, 0, 1})};
  EXPECT_EQ(pareto_select(c, ObjectiveWeights{}), 0u);
  std::vector<RouteCandidate> none;
  EXPECT_EQ(code_of([&] { pareto_select(none, ObjectiveWeights{}); }), ErrorCode::NoCandidates);
}

TEST(ParetoSelect, DominatorWins) {
  std::vector<RouteCandidate> c{cand({1}, {5, 0.1, 0.2, 300}), cand({2}, {4, 0.0, 0.1, 200})};
  EXPECT_TRUE(dominates(c[1].objectives, c[0].objectives));
  EXPECT_EQ(pareto_select(c, ObjectiveWeights{}), 1u);
}

TEST(ParetoSelect, SymmetricPairTakesLowerTravelTime) {
  ObjectiveWeights w;
  w.beta = {1, 1, 0, 0};
  std::vector<RouteCandidate> c{cand({1}, {6, 0.1, 0, 0}), cand({2}, {5, 0.2, 0, 0})};
  EXPECT_EQ(pareto_select(c, w), 1u);
}

TEST(ParetoSelect, NeverDominated) {
  Rng rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = random_candidates(rng, 1 + rng.below(6));
    ObjectiveWeights w;
    for (auto& b : w.beta) b = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
    w.lambda = rng.uniform();
    const auto pick = pareto_select(c, w);
    for (const auto& other : c) EXPECT_FALSE(dominates(other.objectives, c[pick].objectives));
  }
}

TEST(ParetoSelect, InvariantUnderAffineRescaling) {
  Rng rng(29);
  for (int trial = 0; trial < 300; ++trial) {
    auto c = random_candidates(rng, 2 + rng.below(5));
    ObjectiveWeights w;
    const auto before = c[pareto_select(c, w)].route.id();
    const std::size_t m = rng.below(4);
    const double a = rng.uniform(0.1, 10.0), b = rng.uniform(-5.0, 5.0);
    for (auto& x : c) {
      auto v = x.objectives.as_array();
      v[m] = a * v[m] + b;
      x.objectives = {v[0], v[1], v[2], v[3]};
    }
    EXPECT_EQ(c[pareto_select(c, w)].route.id(), before);
  }
}

TEST(ScalarizedRanking, EndpointsMatchSingleObjectiveRankings) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_candidates(rng, 2 + rng.below(5));
    ObjectiveWeights w;
    auto order = [&](auto key) {
      std::vector<std::size_t> idx(c.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (key(c[a]) != key(c[b])) return key(c[a]) < key(c[b]);
        if (c[a].objectives.travel_time != c[b].objectives.travel_time)
          return c[a].objectives.travel_time < c[b].objectives.travel_time;
        return c[a].route.id() < c[b].route.id();
      });
      return idx;
    };
    w.lambda = 1.0;
    EXPECT_EQ(scalarized_ranking(c, w), order([](const RouteCandidate& x) { return x.objectives.travel_time; }));
    w.lambda = 0.0;
    EXPECT_EQ(scalarized_ranking(c, w), order([&](const RouteCandidate& x) {
                return w.alpha_spatial * x.objectives.spatial + w.alpha_demographic * x.objectives.demographic;
              }));
  }
}

TEST(AssignRoutes, ForcedSinglePath) {
  const auto net = path_graph(4);
  const auto part = assign_regions(net, std::vector<RegionId>{0, 0, 1, 1});
  const auto demo = SegmentDemographics::uniform(4);
  std::vector<VehicleRequest> reqs{{7, 0, 3, {}}};
  const auto res = assign_routes(net, part, demo, reqs, free_flow_state(net), fft_weights(net), ObjectiveWeights{});
  ASSERT_EQ(res.assignments.size(), 1u);
  ASSERT_TRUE(res.assignments[0].route);
  EXPECT_EQ(res.assignments[0].route->nodes(net), (std::vector<NodeIndex>{0, 1, 2, 3}));
}

TEST(AssignRoutes, StateFeedbackDivertsSecondVehicle) {
  const auto net = diamond();
  const auto part = assign_regions(net, std::map<std::string, RegionId>{{"O", 0}, {"A", 0}, {"B", 1}, {"D", 1}});
  const auto demo = SegmentDemographics::uniform(4);
  const NodeIndex o = net.index_of("O"), d = net.index_of("D");
  std::vector<VehicleRequest> reqs{{1, o, d, {}}, {2, o, d, {}}};
  ObjectiveWeights w;
  w.lambda = 0.3;
  const auto res = assign_routes(net, part, demo, reqs, free_flow_state(net), fft_weights(net), w);
  ASSERT_TRUE(res.assignments[0].route && res.assignments[1].route);
  EXPECT_NE(res.assignments[0].route->id(), res.assignments[1].route->id());

  // Step through the second decision by hand against the updated flows.
  std::vector<double> flows(net.edge_count(), 0.0);
  for (EdgeId e : res.assignments[0].route->edges) flows[e] += 1.0;
  const auto paths = k_shortest_paths(net, o, d, 5, fft_weights(net));
  for (const auto& p : paths) {
    if (p == *res.assignments[1].route) {
      EXPECT_DOUBLE_EQ(res.assignments[1].objectives.spatial, spatial_impact(p, flows, part, net));
    }
  }
  // Without state updates both vehicles see the same state and choose alike.
  AssignOptions frozen;
  frozen.update_state = false;
  const auto same = assign_routes(net, part, demo, reqs, free_flow_state(net), fft_weights(net), w, frozen);
  EXPECT_EQ(same.assignments[0].route->id(), same.assignments[1].route->id());
}

TEST(AssignRoutes, TimeOnlyWithoutFeedbackIsShortestPath) {
  Rng rng(37);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> w;
    const auto net = random_digraph(rng, 8, 0.35, w, false);
    if (net.edge_count() == 0) continue;
    std::vector<RegionId> regions(8);
    for (std::size_t i = 0; i < 8; ++i) regions[i] = i % 2;
    std::vector<bool> owns(2, false);
    for (const auto& e : net.edges()) owns[regions[e.from]] = true;
    if (!owns[0] || !owns[1]) continue;
    const auto part = assign_regions(net, regions);
    const auto demo = SegmentDemographics::uniform(8, 1.0, 0.5);
    std::vector<VehicleRequest> reqs;
    for (std::uint64_t v = 0; v < 10; ++v) {
      const NodeIndex s = rng.below(8);
      reqs.push_back({v, s, (s + 1 + rng.below(7)) % 8, {}});
    }
    ObjectiveWeights ow;
    ow.beta = {1, 0, 0, 0};
    AssignOptions opts;
    opts.update_state = false;
    const auto res = assign_routes(net, part, demo, reqs, free_flow_state(net), w, ow, opts);
    for (std::size_t i = 0; i < reqs.size(); ++i) {
      const double oracle = bellman_ford(net, reqs[i].origin, reqs[i].destination, w);
      if (!std::isfinite(oracle)) {
        EXPECT_FALSE(res.assignments[i].route);
        continue;
      }
      ASSERT_TRUE(res.assignments[i].route);
      EXPECT_NEAR(path_cost(*res.assignments[i].route, w), oracle, 1e-12);
    }
  }
}

TEST(AssignRoutes, InjectedFlowIsConserved) {
  const auto net = path_graph(6);
  const auto part = assign_regions(net, std::vector<RegionId>{0, 0, 0, 1, 1, 1});
  const auto demo = SegmentDemographics::uniform(6, 1.0, 0.3);
  std::vector<VehicleRequest> reqs{{3, 0, 5, {}}, {1, 5, 2, {}}, {2, 1, 4, {}}, {9, 4, 3, {}}};
  AssignOptions opts;
  opts.flow_increment = 12.0;
  const auto res = assign_routes(net, part, demo, reqs, free_flow_state(net), fft_weights(net), {}, opts);
  double injected = 0.0, expected = 0.0;
  for (const auto& e : res.state.edges) injected += e.flow;
  for (const auto& a : res.assignments) expected += static_cast<double>(a.route->edges.size()) * 12.0;
  EXPECT_DOUBLE_EQ(injected, expected);
  std::vector<std::uint64_t> ids;
  for (const auto& a : res.assignments) ids.push_back(a.vehicle_id);
  EXPECT_EQ(ids, (std::vector<std::uint64_t>{1, 2, 3, 9}));
}

TEST(AssignRoutes, UnreachableIsRecorded) {
  std::vector<std::string> nodes{"a", "b", "c", "d"};
  std::vector<EdgeSpec> edges{{"a", "b", 1.0, 10.0, 0.0, 60.0, {}}, {"c", "d", 1.0, 10.0, 0.0, 60.0, {}}};
  const auto net = build_network(nodes, edges);
  const auto part = assign_regions(net, std::vector<RegionId>{0, 0, 1, 1});
  std::vector<VehicleRequest> reqs{{1, 0, 3, {}}, {2, 0, 1, {}}};
  const auto res =
      assign_routes(net, part, SegmentDemographics::uniform(4), reqs, free_flow_state(net), fft_weights(net), {});
  EXPECT_FALSE(res.assignments[0].route);
  EXPECT_TRUE(res.assignments[1].route);
  EXPECT_EQ(res.unreachable, 1u);
  EXPECT_EQ(assignment_csv_row(res.assignments[0]), "1,,,,,");
  EXPECT_EQ(assignment_csv_row(res.assignments[1]).substr(0, 4), "2,0,");
}
