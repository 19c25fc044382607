// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 100).

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "fedfair/federated.hpp"
#include "fedfair/fixtures.hpp"
#include "fedfair/metrics.hpp"
#include "fedfair/privacy.hpp"
#include "fedfair/routing.hpp"
#include "fedfair/sim.hpp"
#include "test_support.hpp"

using namespace fedfair;
using fedfair::testing::path_graph;
using fedfair::testing::random_sample;
using fedfair::testing::tiny_config;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- C1
Verdict gini_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> l(2 + rng.below(7));
    for (auto& x : l) x = rng.uniform() < 0.15 ? 0.0 : rng.uniform(0.0, 3.0);
    if (std::all_of(l.begin(), l.end(), [](double x) { return x == 0.0; })) l[0] = 1.0;
    double pairs = 0.0, total = 0.0;
    for (double a : l) {
      total += a;
      for (double b : l) pairs += std::fabs(a - b);
    }
    const double k = static_cast<double>(l.size());
    worst = std::max(worst, std::fabs(gini_traffic(l) - pairs / (2.0 * k * k * (total / k))));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 1.0, fmt("max |diff| %.2e over 1000 vectors, %.3f s", worst, secs)};
}

// ---------------------------------------------------------------- C2
Verdict topology_density() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = fs::temp_directory_path() / "fedfair_acceptance_c2";
  fs::create_directories(dir);
  const auto csv = (dir / "topology.csv").string();
  write_topology_csv(network_from_topology(fixtures::metr_topology()), csv);
  const auto net = network_from_topology(read_topology_csv(csv));
  std::set<std::pair<NodeIndex, NodeIndex>> pairs;
  for (const auto& e : net.edges()) pairs.emplace(std::min(e.from, e.to), std::max(e.from, e.to));
  const double n = static_cast<double>(net.node_count());
  const double oracle = static_cast<double>(pairs.size()) / (n * (n - 1.0) / 2.0);
  const double d = network_density(net, DensityMode::Undirected);
  const double secs = seconds_since(t0);
  fs::remove_all(dir);
  const bool ok = net.node_count() == 207 && pairs.size() == 3661 && std::fabs(d - 0.1717) <= 1e-4 &&
                  std::fabs(d - oracle) < 1e-15 && secs < 5.0;
  return {ok, fmt("%zu nodes, %zu undirected edges, density %.6f, %.2f s", net.node_count(), pairs.size(), d, secs)};
}

// ---------------------------------------------------------------- C3
Verdict noise_calibration() {
  const long double ref = std::sqrt(2.0L * std::log(1.25L / 1e-5L));
  const double sigma = calibrate_noise(1.0, 1e-5, 1.0);
  ParameterSet p;
  p.add("g", 100000, 1);
  const auto noisy = add_noise(ModelGradient{p}, sigma, 1.0, 7);
  const auto& v = noisy.values[0].values;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  const double sd = std::sqrt(sq / static_cast<double>(v.size() - 1));
  const double rel = std::fabs(sd - sigma) / sigma;
  const bool ok = std::fabs(sigma - 4.8448) <= 1e-3 && std::fabs(sigma - static_cast<double>(ref)) < 1e-12 && rel < 0.02;
  return {ok, fmt("sigma %.6f (reference %.6Lf), empirical std %.4f (%.2f%% off)", sigma, ref, sd, 100.0 * rel)};
}

// ---------------------------------------------------------------- C4
Verdict composition() {
  const long double e = 0.1L, t = 10.0L;
  const long double ref = std::sqrt(2.0L * t * std::log(1.0L / 1e-5L)) * e + t * e * (std::exp(e) - 1.0L);
  const double got = compose_budget(0.1, 1e-5, 10);
  bool freeze_ok = true;
  for (double budget : {0.5, 1.0, 1.6226, 2.0, 5.0}) {
    PrivacyAccountant acct(budget, 1e-5);
    std::size_t expected = 0;
    while (compose_budget(0.1, 1e-5, expected + 1) <= budget) ++expected;
    std::size_t charged = 0;
    try {
      for (;;) {
        acct.charge(0.1);
        ++charged;
      }
    } catch (const Error& err) {
      freeze_ok = freeze_ok && err.code() == ErrorCode::BudgetExhausted;
    }
    freeze_ok = freeze_ok && charged == expected && acct.frozen() && acct.rounds() == expected &&
                acct.spent() <= budget;
  }
  const bool ok = std::fabs(got - 1.6226) <= 1e-3 && std::fabs(got - static_cast<double>(ref)) < 1e-12 && freeze_ok;
  return {ok, fmt("compose(0.1, 1e-5, 10) = %.6f (reference %.6Lf), freeze point %s", got, ref,
                  freeze_ok ? "exact" : "WRONG")};
}

// ---------------------------------------------------------------- C5
Verdict gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto net = path_graph(5);
  double worst = 0.0;
  for (auto agg : {Aggregator::Attention, Aggregator::Mean}) {
    auto cfg = tiny_config(net, 4);
    cfg.aggregator = agg;
    const auto model = make_model(cfg, 17);
    Rng rng(23);
    const std::vector<GraphSample> batch{random_sample(net, cfg, rng), random_sample(net, cfg, rng)};
    const auto analytic = loss_and_gradient(model, net, batch).gradient.values.flatten();
    GnnModel probe = model;
    auto theta = model.params().flatten();
    const double h = 1e-5;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double keep = theta[i];
      theta[i] = keep + h;
      probe.params().assign_flat(theta);
      const double up = dataset_loss(probe, net, batch);
      theta[i] = keep - h;
      probe.params().assign_flat(theta);
      const double down = dataset_loss(probe, net, batch);
      theta[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-6});
      worst = std::max(worst, std::fabs(fd - analytic[i]) / denom);
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 30.0, fmt("max relative error %.2e, %.2f s", worst, secs)};
}

// ---------------------------------------------------------------- C6
Verdict attention_normalization() {
  Rng rng(606);
  double worst = 0.0;
  std::size_t nodes_checked = 0;
  for (int g = 0; g < 100; ++g) {
    const std::size_t n = 3 + rng.below(10);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("v" + std::to_string(i));
    std::vector<EdgeSpec> edges;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && rng.uniform() < 0.35) edges.push_back({names[i], names[j], rng.uniform(0.5, 4.0), 100.0, 0.0, 60.0, {}});
    const auto net = build_network(names, edges);
    auto cfg = tiny_config(net, 2 + rng.below(6));
    const auto model = make_model(cfg, rng.next_u64());
    const auto sample = random_sample(net, cfg, rng);
    const auto cache = detail::forward_cached(model, net, sample, ForwardMode{});
    for (const auto& layer : cache.layers)
      for (NodeIndex v = 0; v < n; ++v) {
        const auto lo = cache.slot_offset[v], hi = cache.slot_offset[v + 1];
        if (lo == hi) continue;
        double s = 0.0;
        for (auto k = lo; k < hi; ++k) s += layer.alpha[k];
        worst = std::max(worst, std::fabs(s - 1.0));
        ++nodes_checked;
      }
  }
  return {worst <= 1e-9 && nodes_checked > 0,
          fmt("max |sum - 1| %.2e over %zu node-layers in 100 graphs", worst, nodes_checked)};
}

// ---------------------------------------------------------------- C7
Verdict federated_degeneracy() {
  const auto net = path_graph(5);
  const auto gc = tiny_config(net);
  const auto model = make_model(gc, 9);
  Rng rng(1);
  std::vector<GraphSample> local;
  for (int i = 0; i < 6; ++i) local.push_back(random_sample(net, gc, rng));
  FederatedConfig cfg;
  cfg.num_clients = 1;
  cfg.local_epochs = 1;
  cfg.participation = 1.0;
  cfg.quantization.rule = BitsRule::Schedule;
  cfg.quantization.schedule = {32};
  cfg.privacy.clip_norm = 1e6;
  cfg.privacy.noise_multiplier = 0.0;
  cfg.adaptive_clip.reset();
  cfg.parallel = false;
  FederatedState state(model, cfg);
  const std::vector<std::vector<GraphSample>> data{local};
  const auto report = run_round(state, net, data, cfg, 0, 42);

  TrainConfig tc;
  tc.epochs = 1;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.seed = derive_seed(42, {0u, 0u, 1u});
  const auto sgd = local_train(model, net, local, tc);
  ParameterSet expected = model.params();
  expected.axpy(1.0, sgd.update.values);
  const auto a = state.global.params().flatten(), b = expected.flatten();
  const bool same = a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  return {same && report.mean_loss == sgd.final_loss,
          fmt("%zu parameters %s, loss %.9g vs %.9g", a.size(), same ? "bit-identical" : "DIFFER", report.mean_loss,
              sgd.final_loss)};
}

// ---------------------------------------------------------------- C8
Verdict quantization() {
  Rng rng(808);
  ParameterSet p;
  p.add("a", 64, 1);
  p.add("b", 3, 1);
  for (auto& x : p[0].values) x = rng.normal() * 1e3;
  p[1].values = {1e-300, -7.0, 0.5};
  const ModelGradient g{p};
  const bool exact32 = dequantize(quantize(g, 32, 5)) == g;

  ParameterSet q;
  q.add("u", 20, 1);
  for (auto& x : q[0].values) x = rng.uniform(1.0, 2.0);
  const ModelGradient u{q};
  std::vector<double> mean(20, 0.0);
  const int reps = 10000;
  for (int r = 0; r < reps; ++r) {
    const auto back = dequantize(quantize(u, 4, static_cast<std::uint64_t>(r)));
    for (std::size_t i = 0; i < 20; ++i) mean[i] += back.values[0].values[i] / reps;
  }
  double worst_bias = 0.0;
  for (std::size_t i = 0; i < 20; ++i)
    worst_bias = std::max(worst_bias, std::fabs(mean[i] - q[0].values[i]) / std::fabs(q[0].values[i]));

  double worst_step = 0.0;
  for (unsigned b = 1; b <= 32; ++b)
    for (auto mode : {RoundingMode::Stochastic, RoundingMode::Deterministic}) {
      ParameterSet s;
      s.add("w", 64, 1);
      for (auto& x : s[0].values) x = rng.normal(0.0, 3.0);
      const auto back = dequantize(quantize(ModelGradient{s}, b, rng.next_u64(), mode));
      const auto [lo, hi] = std::minmax_element(s[0].values.begin(), s[0].values.end());
      const double step = b == 32 ? 0.0 : (*hi - *lo) / (std::pow(2.0, b) - 1.0);
      for (std::size_t i = 0; i < 64; ++i) {
        const double err = std::fabs(back.values[0].values[i] - s[0].values[i]);
        worst_step = std::max(worst_step, step > 0 ? err / step : (err == 0.0 ? 0.0 : 2.0));
      }
    }
  const bool ok = exact32 && worst_bias < 0.01 && worst_step <= 1.0 + 1e-9;
  return {ok, fmt("b=32 %s, b=4 max relative bias %.4f%%, max error %.4f steps", exact32 ? "exact" : "INEXACT",
                  100.0 * worst_bias, worst_step)};
}

// ---------------------------------------------------------------- C9 / C14 candidates
std::vector<RouteCandidate> random_candidates(Rng& rng, std::size_t n) {
  std::vector<RouteCandidate> c;
  for (std::size_t i = 0; i < n; ++i) {
    RouteObjectives o{rng.uniform(1, 30), rng.uniform(-0.3, 0.3), rng.uniform(0, 1), rng.uniform(100, 900)};
    if (i > 0 && rng.uniform() < 0.3) o.travel_time = c[0].objectives.travel_time;
    if (i > 0 && rng.uniform() < 0.1) o = c[rng.below(i)].objectives;
    c.push_back({Route{{i, i + 100}}, o});
  }
  return c;
}

bool oracle_dominates(const RouteObjectives& a, const RouteObjectives& b) {
  const double x[4] = {a.travel_time, a.spatial, a.demographic, a.emissions};
  const double y[4] = {b.travel_time, b.spatial, b.demographic, b.emissions};
  bool strict = false;
  for (int i = 0; i < 4; ++i) {
    if (x[i] > y[i]) return false;
    if (x[i] < y[i]) strict = true;
  }
  return strict;
}

Verdict pareto_soundness() {
  Rng rng(909);
  int dominated = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = random_candidates(rng, 1 + rng.below(6));
    ObjectiveWeights w;
    for (auto& b : w.beta) b = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
    w.lambda = rng.uniform();
    const auto pick = pareto_select(c, w);
    for (const auto& other : c) dominated += oracle_dominates(other.objectives, c[pick].objectives) ? 1 : 0;
  }
  return {dominated == 0, fmt("%d dominated selections in 1000 candidate sets", dominated)};
}

// ---------------------------------------------------------------- C10
struct Path {
  double cost;
  std::vector<EdgeId> edges;
  bool operator<(const Path& o) const { return cost != o.cost ? cost < o.cost : edges < o.edges; }
};

void enumerate(const RoadNetwork& net, NodeIndex v, NodeIndex t, const std::vector<double>& w, std::vector<bool>& on,
               std::vector<EdgeId>& stack, std::vector<Path>& out) {
  if (v == t) {
    double c = 0.0;
    for (EdgeId e : stack) c += w[e];
    out.push_back({c, stack});
    return;
  }
  on[v] = true;
  for (EdgeId e : net.out_edges(v)) {
    if (on[net.edge(e).to]) continue;
    stack.push_back(e);
    enumerate(net, net.edge(e).to, t, w, on, stack, out);
    stack.pop_back();
  }
  on[v] = false;
}

bool strongly_connected(const RoadNetwork& net) {
  const std::size_t n = net.node_count();
  for (NodeIndex s = 0; s < n; ++s) {
    std::vector<bool> seen(n, false);
    std::vector<NodeIndex> todo{s};
    seen[s] = true;
    while (!todo.empty()) {
      const NodeIndex v = todo.back();
      todo.pop_back();
      for (EdgeId e : net.out_edges(v))
        if (!seen[net.edge(e).to]) {
          seen[net.edge(e).to] = true;
          todo.push_back(net.edge(e).to);
        }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) return false;
  }
  return true;
}

Verdict k_shortest() {
  Rng rng(1010);
  std::size_t graphs = 0, queries = 0, mismatches = 0;
  while (graphs < 200) {
    const std::size_t n = 2 + rng.below(7);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("v" + std::to_string(i));
    std::vector<EdgeSpec> edges;
    std::vector<double> w;
    const bool integer = graphs % 2 == 0;
    const double p = rng.uniform(0.3, 0.7);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && rng.uniform() < p) {
          const double x = integer ? static_cast<double>(1 + rng.below(4)) : rng.uniform(0.5, 5.0);
          edges.push_back({names[i], names[j], x, 100.0, 0.0, 60.0, {}});
          w.push_back(x);
        }
    const auto net = build_network(names, edges);
    if (!strongly_connected(net)) continue;
    ++graphs;
    for (NodeIndex s = 0; s < n; ++s)
      for (NodeIndex t = 0; t < n; ++t) {
        if (s == t) continue;
        std::vector<Path> oracle;
        std::vector<bool> on(n, false);
        std::vector<EdgeId> stack;
        enumerate(net, s, t, w, on, stack, oracle);
        std::sort(oracle.begin(), oracle.end());
        for (std::size_t k : {1u, 3u, 8u}) {
          const auto got = k_shortest_paths(net, s, t, k, w);
          ++queries;
          bool same = got.size() == std::min(k, oracle.size());
          for (std::size_t i = 0; same && i < got.size(); ++i) same = got[i].edges == oracle[i].edges;
          mismatches += same ? 0 : 1;
        }
      }
  }
  return {mismatches == 0,
          fmt("%zu mismatches in %zu queries over %zu strongly connected digraphs", mismatches, queries, graphs)};
}

// ---------------------------------------------------------------- C11
struct ConvergenceRun {
  int passing = 0;
  double secs = 0.0;
  std::vector<std::vector<double>> losses;
};

ConvergenceRun convergence_sweep(bool noise) {
  const auto t0 = std::chrono::steady_clock::now();
  ConvergenceRun out;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = fixtures::grid_fixture(6, seed);
    ScenarioConfig sc;
    sc.seed = seed;
    sc.horizon = 20;
    FederatedConfig fed;
    fed.num_clients = 6;
    fed.rounds = 10;
    if (!noise) fed.privacy.noise_multiplier = 0.0;
    const auto rep = run_training(Scenario{f.net, f.partition, f.demographics, sc}, fed);
    std::vector<double> loss;
    for (const auto& r : rep.rounds) loss.push_back(r.mean_loss);
    std::vector<double> smooth;
    for (std::size_t i = 0; i < loss.size(); ++i) {
      const std::size_t lo = i >= 2 ? i - 2 : 0;
      smooth.push_back(std::accumulate(loss.begin() + static_cast<std::ptrdiff_t>(lo),
                                       loss.begin() + static_cast<std::ptrdiff_t>(i) + 1, 0.0) /
                       static_cast<double>(i - lo + 1));
    }
    bool monotone = loss.size() == 10;
    for (std::size_t i = 3; i < smooth.size(); ++i) monotone = monotone && smooth[i] <= smooth[i - 1];
    out.passing += monotone ? 1 : 0;
    out.losses.push_back(loss);
  }
  out.secs = seconds_since(t0);
  return out;
}

std::string loss_trace(const std::vector<double>& l) {
  std::string s;
  for (double x : l) s += fmt(" %.4f", x);
  return s;
}

bool g_noise_free_probe = false;

Verdict convergence() {
  const auto run = convergence_sweep(true);
  std::string detail = fmt("%d/10 seeds smoothed loss non-increasing from round 3, %.0f s; seed 0 loss:%s",
                           run.passing, run.secs, loss_trace(run.losses[0]).c_str());
  if (g_noise_free_probe) {
    const auto clean = convergence_sweep(false);
    detail += fmt(" | info: without DP noise %d/10, %.0f s", clean.passing, clean.secs);
  }
  return {run.passing >= 9 && run.secs < 300.0, detail};
}

// ---------------------------------------------------------------- C12
Verdict fairness_direction() {
  int wins = 0;
  double fair_tt = 0.0, base_tt = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = fixtures::grid_fixture(4, seed);
    ScenarioConfig sc;
    sc.seed = seed;
    sc.horizon = 30;
    FederatedConfig fed;
    fed.num_clients = 4;
    fed.rounds = 6;
    const Scenario s{f.net, f.partition, f.demographics, sc};
    ObjectiveWeights fair;
    ObjectiveWeights shortest;
    shortest.beta = {1.0, 0.0, 0.0, 0.0};
    const auto a = run_scenario(s, fed, fair);
    const auto b = run_scenario(s, fed, shortest);
    wins += *a.summary.final_gini <= *b.summary.final_gini ? 1 : 0;
    fair_tt += *a.summary.mean_travel_time_min;
    base_tt += *b.summary.mean_travel_time_min;
  }
  const double penalty = fair_tt / base_tt - 1.0;
  return {wins >= 9 && penalty <= 0.25,
          fmt("fairness-weighted Gini <= shortest-path on %d/10 seeds, travel-time penalty %.2f%%", wins, 100.0 * penalty)};
}

// ---------------------------------------------------------------- C13
Verdict communication() {
  bool closed = true;
  for (std::uint64_t params : {1000u, 62791u, 123457u})
    for (std::uint64_t clients : {2u, 6u, 10u}) {
      const auto base = ledger_bytes(params, 32, clients, 4);
      const auto comp = ledger_bytes(params, 8, clients / 2, 4);
      closed = closed && uplink_reduction(comp, base) == 1.0 - (8.0 / 32.0) * 0.5;
    }
  ReportSummary s;
  s.steps = 1;
  s.final_gini = 0.22;
  s.total_bytes = 28'200'000;
  const std::vector<BaselineRow> paper{{"fedavg", std::nullopt, std::nullopt, 256.7, std::nullopt}};
  const auto table = evaluate(s, paper);
  const auto* row = table.find("fedavg", "total_mb");
  const double delta = row && row->delta_pct ? *row->delta_pct : 0.0;
  return {closed && std::fabs(delta + 89.0) <= 0.1,
          fmt("closed-form reduction %s 87.5%%, evaluate 28.2 vs 256.7 MB gives %.2f%%", closed ? "=" : "!=", delta)};
}

// ---------------------------------------------------------------- C14
Verdict scalarization_endpoints() {
  Rng rng(1414);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_candidates(rng, 2 + rng.below(5));
    ObjectiveWeights w;
    auto order = [&](auto key) {
      std::vector<std::size_t> idx(c.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (key(c[a]) != key(c[b])) return key(c[a]) < key(c[b]);
        if (c[a].objectives.travel_time != c[b].objectives.travel_time)
          return c[a].objectives.travel_time < c[b].objectives.travel_time;
        return c[a].route.id() < c[b].route.id();
      });
      return idx;
    };
    w.lambda = 1.0;
    mismatches += scalarized_ranking(c, w) != order([](const RouteCandidate& x) { return x.objectives.travel_time; });
    w.lambda = 0.0;
    mismatches += scalarized_ranking(c, w) != order([&](const RouteCandidate& x) {
      return w.alpha_spatial * x.objectives.spatial + w.alpha_demographic * x.objectives.demographic;
    });
  }
  return {mismatches == 0, fmt("%d ranking mismatches over 100 candidate sets at lambda 0 and 1", mismatches)};
}

// ---------------------------------------------------------------- C15
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::ifstream in(entry.path(), std::ios::binary);
    files[entry.path().filename().string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return files;
}

Verdict determinism() {
  const auto dir = fs::temp_directory_path() / "fedfair_acceptance_c15";
  fs::remove_all(dir);
  const std::string cmd = std::string(FEDFAIR_CLI) + " simulate --seed 7 --emit-csv --output " + dir.string() +
                          " > /dev/null 2>&1";
  const int first = std::system(cmd.c_str());
  const auto a = snapshot(dir);
  const int second = std::system(cmd.c_str());
  const auto b = snapshot(dir);
  fs::remove_all(dir);
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) differing += !b.count(name) || b.at(name) != bytes;
  const bool ok = first == 0 && second == 0 && a.size() >= 5 && a.size() == b.size() && differing == 0;
  return {ok, fmt("%zu report files, %zu differ between two runs", a.size(), differing)};
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--noise-free-probe") g_noise_free_probe = true;

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"gini oracle equivalence", gini_oracle},
      {"topology density", topology_density},
      {"noise calibration", noise_calibration},
      {"budget composition", composition},
      {"gradient correctness", gradient_check},
      {"attention normalization", attention_normalization},
      {"federated degeneracy", federated_degeneracy},
      {"quantization", quantization},
      {"pareto soundness", pareto_soundness},
      {"k-shortest correctness", k_shortest},
      {"desk-scale convergence", convergence},
      {"fairness direction", fairness_direction},
      {"communication accounting", communication},
      {"scalarization endpoints", scalarization_endpoints},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s  %2zu  %-26s %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return std::min(failed, 100);
}
