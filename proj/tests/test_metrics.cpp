#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedfair/metrics.hpp"
#include "fedfair/rng.hpp"
#include "test_support.hpp"

using namespace fedfair;

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

double brute_gini(const std::vector<double>& l) {
  double pair_sum = 0.0, total = 0.0;
  for (double a : l) {
    total += a;
    for (double b : l) pair_sum += std::fabs(a - b);
  }
  const double k = static_cast<double>(l.size());
  return pair_sum / (2.0 * k * k * (total / k));
}

std::vector<double> random_loads(Rng& rng, std::size_t k) {
  std::vector<double> l(k);
  for (auto& x : l) x = rng.uniform() < 0.15 ? 0.0 : rng.uniform(0.0, 3.0);
  if (std::all_of(l.begin(), l.end(), [](double x) { return x == 0.0; })) l[0] = 1.0;
  return l;
}

}  // namespace

TEST(RegionLoad, HandExamples) {
  const auto net = build_network({"a", "b", "c"}, {{"a", "b", 1.0, 100.0, 0.0, 60.0, {}},
                                                   {"a", "c", 1.0, 100.0, 0.0, 60.0, {}},
                                                   {"c", "a", 1.0, 50.0, 0.0, 60.0, {}}});
  const auto one = assign_regions(net, std::vector<RegionId>{0, 0, 0});
  std::vector<double> flows{30.0, 60.0, 0.0};
  EXPECT_DOUBLE_EQ(region_load(flows, one, net)[0], (0.3 + 0.6 + 0.0) / 3.0);

  const auto two = assign_regions(net, std::vector<RegionId>{0, 1, 1});
  const auto l = region_load(flows, two, net);
  EXPECT_DOUBLE_EQ(l[0], 0.45);  // both a-edges belong to a's region
  EXPECT_DOUBLE_EQ(l[1], 0.0);

  std::vector<double> zero(3, 0.0);
  EXPECT_EQ(region_load(zero, two, net), (std::vector<double>{0.0, 0.0}));
  const auto sink = assign_regions(net, std::vector<RegionId>{0, 1, 0});
  EXPECT_EQ(code_of([&] { region_load(zero, sink, net); }), ErrorCode::EmptyRegion);
}

TEST(RegionLoad, SymmetricRegionsGetEqualLoads) {
  const auto net = fedfair::testing::path_graph(4);
  const auto part = assign_regions(net, std::vector<RegionId>{0, 0, 1, 1});
  std::vector<double> flows(net.edge_count(), 0.0);
  for (const auto& e : net.edges()) flows[e.id] = 0.25 * e.capacity;
  const auto l = region_load(flows, part, net);
  EXPECT_DOUBLE_EQ(l[0], l[1]);
}

TEST(Gini, HandExamples) {
  EXPECT_DOUBLE_EQ(gini_traffic(std::vector<double>{0.5, 0.5, 0.5}), 0.0);
  EXPECT_DOUBLE_EQ(gini_traffic(std::vector<double>{0.0, 1.0}), 0.5);
  EXPECT_NEAR(gini_traffic(std::vector<double>{0.2, 0.4, 0.6, 0.8}), 0.25, 1e-15);
  EXPECT_EQ(code_of([] { gini_traffic(std::vector<double>{0.0, 0.0}); }), ErrorCode::ZeroMeanLoad);
  EXPECT_EQ(code_of([] { gini_traffic(std::vector<double>{1.0}); }), ErrorCode::SingleRegion);
  EXPECT_EQ(gini_or_zero(std::vector<double>{0.0, 0.0}), 0.0);
}

TEST(Gini, MatchesBruteForceDoubleSum) {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto l = random_loads(rng, 2 + rng.below(7));
    ASSERT_NEAR(gini_traffic(l), brute_gini(l), 1e-12) << trial;
  }
}

TEST(Gini, ScaleAndPermutationInvariance) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    auto l = random_loads(rng, 2 + rng.below(7));
    const double g = gini_traffic(l), j = jain_index(l);
    auto scaled = l;
    const double c = rng.uniform(0.01, 100.0);
    for (auto& x : scaled) x *= c;
    EXPECT_NEAR(gini_traffic(scaled), g, 1e-12);
    std::reverse(l.begin(), l.end());
    std::rotate(l.begin(), l.begin() + 1, l.end());
    EXPECT_NEAR(gini_traffic(l), g, 1e-12);
    EXPECT_NEAR(jain_index(l), j, 1e-12);
    EXPECT_GE(g, 0.0);
    EXPECT_LT(g, 1.0);
    EXPECT_GE(j, 1.0 / static_cast<double>(l.size()) - 1e-12);
    EXPECT_LE(j, 1.0 + 1e-12);
  }
}

TEST(GiniTemporal, Examples) {
  EXPECT_DOUBLE_EQ(gini_temporal(std::vector<double>{0.2, 0.4}, std::vector<double>{1.0, 1.0}), 0.3);
  EXPECT_DOUBLE_EQ(gini_temporal(std::vector<double>{0.2, 0.4}, std::vector<double>{2.0, 0.0}), 0.2);
  EXPECT_EQ(gini_temporal(std::vector<double>{0.2, 0.4}, std::vector<double>{0.0, 0.0}), 0.0);
  EXPECT_EQ(code_of([] {
              gini_temporal(std::vector<double>{0.2, 0.4}, std::vector<double>{0.0, 0.0}, TemporalOptions{true});
            }),
            ErrorCode::AllZero);
  EXPECT_EQ(code_of([] { gini_temporal(std::vector<double>{0.2}, std::vector<double>{1.0, 1.0}); }),
            ErrorCode::LengthMismatch);
}

TEST(Jain, Examples) {
  EXPECT_DOUBLE_EQ(jain_index(std::vector<double>{1, 1, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(jain_index(std::vector<double>{1, 0, 0, 0}), 0.25);
  EXPECT_DOUBLE_EQ(jain_index(std::vector<double>{2, 2}), 1.0);
  EXPECT_EQ(code_of([] { jain_index(std::vector<double>{0, 0}); }), ErrorCode::AllZero);
}

TEST(CombinedFairness, Examples) {
  EXPECT_DOUBLE_EQ(combined_fairness(0.3, 0.9, 0.7, {1.0, 0.0, 0.0}), 0.3);
  EXPECT_NEAR(combined_fairness(0.2, 0.4, 0.1, {0.5, 0.3, 0.2}), 0.24, 1e-15);
  EXPECT_EQ(combined_fairness(0.2, 0.4, 0.1, {0.0, 0.0, 0.0}), 0.0);
  EXPECT_EQ(code_of([] { combined_fairness(0.2, 0.4, 0.1, {-1.0, 0.0, 0.0}); }), ErrorCode::NegativeWeight);
  EXPECT_DOUBLE_EQ(fairness_score(0.22), 0.78);
}

TEST(DemographicAggregate, MeanOfImpacts) {
  EXPECT_EQ(demographic_aggregate(std::vector<double>{}), 0.0);
  EXPECT_DOUBLE_EQ(demographic_aggregate(std::vector<double>{0.5, 1.5, 1.0}), 1.0);
}
