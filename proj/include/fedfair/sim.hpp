#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedfair/error.hpp"
#include "fedfair/federated.hpp"
#include "fedfair/format.hpp"
#include "fedfair/gnn.hpp"
#include "fedfair/metrics.hpp"
#include "fedfair/network.hpp"
#include "fedfair/rng.hpp"
#include "fedfair/routing.hpp"

namespace fedfair {

// ---------------------------------------------------------------------------
// Demand and dynamics

struct DemandModel {
  double rate = 20.0;                       // vehicles per step
  std::vector<double> origin_weights;       // empty: uniform over nodes
  std::vector<double> destination_weights;  // empty: uniform over nodes

  void validate(const RoadNetwork& net) const {
    require(rate >= 0.0 && std::isfinite(rate), ErrorCode::RangeViolation, "demand rate must be >= 0");
    require(net.node_count() >= 2, ErrorCode::TooFewNodes, "demand needs at least two nodes");
    for (const auto* w : {&origin_weights, &destination_weights}) {
      if (w->empty()) continue;
      require(w->size() == net.node_count(), ErrorCode::LengthMismatch, "sampling weights must cover every node");
      double total = 0.0;
      for (double x : *w) {
        require(x >= 0.0 && std::isfinite(x), ErrorCode::NegativeWeight, "sampling weights must be >= 0");
        total += x;
      }
      require(total > 0.0, ErrorCode::AllZero, "sampling weights sum to zero");
    }
  }
};

/// Node sampling weights that give every region the share `region_weights[r]`,
/// spread evenly over its members.
inline std::vector<double> region_weighted(const RegionPartition& partition, std::span<const double> region_weights) {
  require(region_weights.size() == partition.region_count(), ErrorCode::LengthMismatch,
          "one weight per region expected");
  std::vector<double> w(partition.region_map().size(), 0.0);
  for (RegionId r = 0; r < partition.region_count(); ++r)
    for (NodeIndex v : partition.members(r)) w[v] = region_weights[r] / static_cast<double>(partition.region_size(r));
  return w;
}

namespace detail {

inline NodeIndex sample_node(Rng& rng, const std::vector<double>& weights, std::size_t n) {
  if (weights.empty()) return static_cast<NodeIndex>(rng.below(n));
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return 0;
}

}  // namespace detail

/// Poisson(rate) requests for one step with origin/destination drawn from the
/// model's weights; a destination equal to its origin is redrawn.
inline std::vector<VehicleRequest> generate_demand(const DemandModel& model, const RoadNetwork& net,
                                                   std::size_t step, std::uint64_t seed) {
  model.validate(net);
  Rng rng(derive_seed(seed, {0xde, step}));
  const std::uint64_t count = rng.poisson(model.rate);
  std::vector<VehicleRequest> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    VehicleRequest r;
    r.vehicle_id = static_cast<std::uint64_t>(step) * 1000000ULL + i;
    std::size_t attempts = 0;
    do {
      require(++attempts <= 10000, ErrorCode::RangeViolation, "cannot draw distinct origin and destination");
      r.origin = detail::sample_node(rng, model.origin_weights, net.node_count());
      r.destination = detail::sample_node(rng, model.destination_weights, net.node_count());
    } while (r.origin == r.destination);
    out.push_back(r);
  }
  return out;
}

inline constexpr double kBprAlpha = 0.15;
inline constexpr double kBprBeta = 4.0;
inline constexpr double kFlowDecay = 0.7;

/// BPR volume-delay: t0 (1 + 0.15 (flow / capacity)^4).
inline double ground_truth_time(const Edge& e, double flow) {
  require(flow >= 0.0, ErrorCode::RangeViolation, "flow must be >= 0");
  const double vc = flow / e.capacity;
  return e.free_flow_time * (1.0 + kBprAlpha * std::pow(vc, kBprBeta));
}

/// State whose speeds, travel times and densities follow from `flows`.
inline TrafficState state_from_flows(const RoadNetwork& net, std::span<const double> flows, std::int64_t time_step) {
  TrafficState s;
  s.time_step = time_step;
  s.edges.resize(net.edge_count());
  for (const auto& e : net.edges()) {
    auto& es = s.edges[e.id];
    es.flow = flows[e.id];
    es.travel_time = ground_truth_time(e, es.flow);
    es.speed_mph = e.distance_miles / es.travel_time * 60.0;
    es.density = es.flow / e.capacity;
  }
  return s;
}

/// Per-edge flow injected by a set of assignments.
inline std::vector<double> injected_flows(const RoadNetwork& net, std::span<const Assignment> assignments,
                                          double increment) {
  std::vector<double> inj(net.edge_count(), 0.0);
  for (const auto& a : assignments) {
    if (!a.route) continue;
    for (EdgeId e : a.route->edges) {
      require(e < inj.size(), ErrorCode::MissingState, "assignment references unknown edge");
      inj[e] += increment;
    }
  }
  return inj;
}

/// Flows decay by 0.7 and gain the injected route flow; travel times follow BPR.
inline TrafficState step(const TrafficState& previous, const RoadNetwork& net, std::span<const Assignment> assignments,
                         double increment) {
  require(previous.edges.size() == net.edge_count(), ErrorCode::MissingState, "state must cover every edge");
  auto flows = injected_flows(net, assignments, increment);
  for (std::size_t e = 0; e < flows.size(); ++e) flows[e] += kFlowDecay * previous.edges[e].flow;
  return state_from_flows(net, flows, previous.time_step + 1);
}

// ---------------------------------------------------------------------------
// Observations

/// Node features: mean out-edge and mean in-edge density.
inline std::vector<std::vector<double>> node_features(const RoadNetwork& net, const TrafficState& state) {
  std::vector<std::vector<double>> f(net.node_count(), std::vector<double>(2, 0.0));
  for (NodeIndex v = 0; v < net.node_count(); ++v) {
    const auto& out = net.out_edges(v);
    const auto& in = net.in_edges(v);
    for (EdgeId e : out) f[v][0] += state.edges[e].density;
    for (EdgeId e : in) f[v][1] += state.edges[e].density;
    if (!out.empty()) f[v][0] /= static_cast<double>(out.size());
    if (!in.empty()) f[v][1] /= static_cast<double>(in.size());
  }
  return f;
}

/// Training sample: features from the state, speed targets with
/// multiplicative Gaussian noise of relative size `noise`.
inline GraphSample observe(const RoadNetwork& net, const TrafficState& state, double noise, Rng& rng) {
  GraphSample s;
  s.features = node_features(net, state);
  s.targets.resize(net.edge_count());
  for (const auto& e : net.edges()) {
    const double v = state.edges[e.id].speed_mph * (1.0 + noise * rng.normal());
    s.targets[e.id] = std::max(v, 0.1);
  }
  return s;
}

inline std::vector<double> predict_times(const GnnModel& model, const RoadNetwork& net, const TrafficState& state) {
  GraphSample s;
  s.features = node_features(net, state);
  return forward(model, net, s).edge_time;
}

inline GnnConfig model_config_for(const RoadNetwork& net, std::size_t hidden = 64, std::size_t layers = 3,
                                  double dropout = 0.2, Aggregator aggregator = Aggregator::Attention) {
  GnnConfig c;
  c.feature_width = 2;
  c.static_width = net.node_attr_width();
  c.edge_width = net.edge_attr_width();
  c.hidden = hidden;
  c.layers = layers;
  c.dropout = dropout;
  c.aggregator = aggregator;
  return c;
}

// ---------------------------------------------------------------------------
// Scenario

struct ScenarioConfig {
  std::size_t horizon = 50;         // steps
  double step_minutes = 5.0;
  std::size_t steps_per_round = 5;  // steps of observations per federated round
  DemandModel demand;
  double observation_noise = 0.05;
  std::uint64_t seed = 0;
  std::size_t k = 3;
  std::size_t diverse = 2;
  std::size_t hidden = 64;
  std::size_t layers = 3;
  double dropout = 0.2;
  Aggregator aggregator = Aggregator::Attention;

  /// Hourly flow contributed by one vehicle during one step.
  double flow_increment() const { return 60.0 / step_minutes; }

  void validate() const {
    require(horizon >= 1, ErrorCode::RangeViolation, "horizon must be >= 1");
    require(step_minutes > 0.0 && std::isfinite(step_minutes), ErrorCode::RangeViolation, "step length must be > 0");
    require(steps_per_round >= 1, ErrorCode::RangeViolation, "steps_per_round must be >= 1");
    require(observation_noise >= 0.0, ErrorCode::RangeViolation, "observation noise must be >= 0");
    require(k >= 1, ErrorCode::InvalidK, "k must be >= 1");
  }
};

struct Scenario {
  const RoadNetwork& net;
  const RegionPartition& partition;
  const SegmentDemographics& demographics;
  ScenarioConfig config;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t vehicles = 0;
  std::size_t assigned = 0;
  std::size_t unreachable = 0;
  std::optional<double> mean_travel_time_min;  // realized, over vehicles assigned this step
  double mean_edge_time_min = 0.0;
  double gini = 0.0;
  std::optional<double> jain;
  double total_flow = 0.0;
};

struct StepAssignment {
  std::size_t step = 0;
  Assignment assignment;
};

struct ReportSummary {
  std::size_t steps = 0;
  std::size_t vehicles = 0;
  std::size_t assigned = 0;
  std::size_t unreachable = 0;
  std::optional<double> mean_travel_time_min;
  std::optional<double> final_gini;
  std::optional<double> fairness_score;
  std::optional<double> final_jain;
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;
  std::uint64_t total_bytes = 0;
  double epsilon_spent = 0.0;
  std::size_t rounds_completed = 0;
  bool budget_exhausted = false;
  std::optional<double> final_loss;
};

struct ScenarioReport {
  std::vector<StepRecord> steps;
  std::vector<RoundReport> rounds;
  std::vector<std::size_t> round_steps;  // step after which each round ran
  std::vector<StepAssignment> assignments;
  ReportSummary summary;
  double delta = 0.0;
  GnnModel final_model;
};

namespace detail {

inline StepRecord measure_step(const RoadNetwork& net, const RegionPartition& partition, const TrafficState& state,
                               std::size_t step, std::size_t vehicles, const AssignmentResult& assigned) {
  StepRecord r;
  r.step = step;
  r.vehicles = vehicles;
  r.unreachable = assigned.unreachable;
  double trip_sum = 0.0;
  for (const auto& a : assigned.assignments) {
    if (!a.route) continue;
    ++r.assigned;
    for (EdgeId e : a.route->edges) trip_sum += state.edges[e].travel_time;
  }
  if (r.assigned > 0) r.mean_travel_time_min = trip_sum / static_cast<double>(r.assigned);
  for (const auto& es : state.edges) {
    r.mean_edge_time_min += es.travel_time;
    r.total_flow += es.flow;
  }
  r.mean_edge_time_min /= static_cast<double>(std::max<std::size_t>(1, state.edges.size()));
  const auto loads = region_load(state, partition, net);
  r.gini = partition.region_count() >= 2 ? gini_or_zero(loads) : 0.0;
  if (std::any_of(loads.begin(), loads.end(), [](double x) { return x > 0.0; })) r.jain = jain_index(loads);
  return r;
}

inline std::vector<std::vector<GraphSample>> split_by_region(const std::vector<GraphSample>& buffer,
                                                             const RegionPartition& partition,
                                                             const RoadNetwork& net) {
  std::vector<std::vector<GraphSample>> out(partition.region_count());
  for (RegionId r = 0; r < partition.region_count(); ++r)
    for (const auto& s : buffer) out[r].push_back(scope_to_region(s, partition, net, r));
  return out;
}

inline void check_clients(const FederatedConfig& fed, const RegionPartition& partition) {
  require(fed.num_clients == partition.region_count(), ErrorCode::RangeViolation,
          "num_clients (" + std::to_string(fed.num_clients) + ") must equal the region count (" +
              std::to_string(partition.region_count()) + ")");
}

inline void summarize(ScenarioReport& rep, const FederatedState& fs) {
  auto& s = rep.summary;
  s.steps = rep.steps.size();
  double trip_sum = 0.0;
  for (const auto& st : rep.steps) {
    s.vehicles += st.vehicles;
    s.assigned += st.assigned;
    s.unreachable += st.unreachable;
    if (st.mean_travel_time_min) trip_sum += *st.mean_travel_time_min * static_cast<double>(st.assigned);
  }
  if (s.assigned > 0) s.mean_travel_time_min = trip_sum / static_cast<double>(s.assigned);
  if (!rep.steps.empty()) {
    s.final_gini = rep.steps.back().gini;
    s.fairness_score = fairness_score(*s.final_gini);
    s.final_jain = rep.steps.back().jain;
  }
  s.uplink_bytes = fs.ledger.totals().uplink();
  s.downlink_bytes = fs.ledger.totals().downlink;
  s.total_bytes = s.uplink_bytes + s.downlink_bytes;
  s.epsilon_spent = fs.accountant.spent();
  s.rounds_completed = rep.rounds.size();
  if (!rep.rounds.empty()) s.final_loss = rep.rounds.back().mean_loss;
}

}  // namespace detail

/// Time-stepped closed loop: demand, prediction with the current global
/// model, fairness-aware assignment, BPR state update; every `steps_per_round`
/// steps the observations gathered since the last round drive one federated
/// round. Budget exhaustion stops training but not the simulation.
inline ScenarioReport run_scenario(const Scenario& sc, const FederatedConfig& fed, const ObjectiveWeights& weights) {
  const auto& cfg = sc.config;
  cfg.validate();
  fed.validate();
  weights.validate();
  cfg.demand.validate(sc.net);
  detail::check_clients(fed, sc.partition);
  sc.demographics.validate(sc.net);

  const auto model_cfg = model_config_for(sc.net, cfg.hidden, cfg.layers, cfg.dropout, cfg.aggregator);
  FederatedState fs(make_model(model_cfg, derive_seed(cfg.seed, {0x30})), fed);
  ScenarioReport rep;
  rep.delta = fed.privacy.delta;
  TrafficState state = free_flow_state(sc.net);
  Rng obs_rng(derive_seed(cfg.seed, {0x0b5}));
  std::vector<GraphSample> buffer;
  std::size_t round = 0;

  AssignOptions opts;
  opts.k = cfg.k;
  opts.diverse = cfg.diverse;
  opts.flow_increment = cfg.flow_increment();
  opts.congestion = [](const Edge& e, double flow) { return ground_truth_time(e, flow); };

  for (std::size_t t = 0; t < cfg.horizon; ++t) {
    const auto requests = generate_demand(cfg.demand, sc.net, t, cfg.seed);
    const auto predicted = predict_times(fs.global, sc.net, state);
    opts.step = t;
    const auto assigned =
        assign_routes(sc.net, sc.partition, sc.demographics, requests, state, predicted, weights, opts);
    state = step(state, sc.net, assigned.assignments, opts.flow_increment);
    rep.steps.push_back(detail::measure_step(sc.net, sc.partition, state, t, requests.size(), assigned));
    for (const auto& a : assigned.assignments) rep.assignments.push_back({t, a});
    buffer.push_back(observe(sc.net, state, cfg.observation_noise, obs_rng));

    const bool boundary = (t + 1) % cfg.steps_per_round == 0;
    if (boundary && round < fed.rounds && !rep.summary.budget_exhausted) {
      const auto data = detail::split_by_region(buffer, sc.partition, sc.net);
      try {
        auto rr = run_round(fs, sc.net, data, fed, round, derive_seed(cfg.seed, {0xfe}));
        rr.travel_time_min = rep.steps.back().mean_travel_time_min;
        rr.gini = rep.steps.back().gini;
        rr.jain = rep.steps.back().jain;
        rep.rounds.push_back(std::move(rr));
        rep.round_steps.push_back(t);
        ++round;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::BudgetExhausted) throw;
        rep.summary.budget_exhausted = true;
      }
      buffer.clear();
    }
  }
  detail::summarize(rep, fs);
  rep.final_model = fs.global;
  return rep;
}

/// Federated training without the routing loop. Demand routed on free-flow
/// shortest paths is simulated for `horizon` steps once; the resulting
/// observations, scoped per region, are each client's fixed local dataset for
/// every round.
inline ScenarioReport run_training(const Scenario& sc, const FederatedConfig& fed) {
  const auto& cfg = sc.config;
  cfg.validate();
  fed.validate();
  cfg.demand.validate(sc.net);
  detail::check_clients(fed, sc.partition);

  const auto model_cfg = model_config_for(sc.net, cfg.hidden, cfg.layers, cfg.dropout, cfg.aggregator);
  FederatedState fs(make_model(model_cfg, derive_seed(cfg.seed, {0x30})), fed);
  ScenarioReport rep;
  rep.delta = fed.privacy.delta;
  TrafficState state = free_flow_state(sc.net);
  Rng obs_rng(derive_seed(cfg.seed, {0x0b5}));
  std::vector<double> fft;
  for (const auto& e : sc.net.edges()) fft.push_back(e.free_flow_time);
  ObjectiveWeights time_only;
  time_only.beta = {1.0, 0.0, 0.0, 0.0};
  AssignOptions opts;
  opts.k = 1;
  opts.diverse = 0;
  opts.flow_increment = cfg.flow_increment();

  std::vector<GraphSample> buffer;
  for (std::size_t t = 0; t < cfg.horizon; ++t) {
    const auto requests = generate_demand(cfg.demand, sc.net, t, cfg.seed);
    const auto assigned = assign_routes(sc.net, sc.partition, sc.demographics, requests, state, fft, time_only, opts);
    state = step(state, sc.net, assigned.assignments, opts.flow_increment);
    rep.steps.push_back(detail::measure_step(sc.net, sc.partition, state, t, requests.size(), assigned));
    buffer.push_back(observe(sc.net, state, cfg.observation_noise, obs_rng));
  }
  const auto data = detail::split_by_region(buffer, sc.partition, sc.net);
  for (std::size_t round = 0; round < fed.rounds; ++round) {
    try {
      rep.rounds.push_back(run_round(fs, sc.net, data, fed, round, derive_seed(cfg.seed, {0xfe})));
      rep.round_steps.push_back(cfg.horizon - 1);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BudgetExhausted) throw;
      rep.summary.budget_exhausted = true;
      break;
    }
  }
  detail::summarize(rep, fs);
  rep.final_model = fs.global;
  return rep;
}

// ---------------------------------------------------------------------------
// Report output

inline nlohmann::ordered_json to_json(const StepRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["vehicles"] = r.vehicles;
  j["assigned"] = r.assigned;
  j["unreachable"] = r.unreachable;
  j["mean_travel_time_min"] = optional_json(r.mean_travel_time_min);
  j["mean_edge_time_min"] = r.mean_edge_time_min;
  j["gini"] = r.gini;
  j["jain"] = optional_json(r.jain);
  j["total_flow"] = r.total_flow;
  return j;
}

/// Per-round fairness record; the temporal Gini weights every step so far equally.
inline nlohmann::ordered_json metrics_json(const ScenarioReport& rep, std::size_t i) {
  const std::size_t t = rep.round_steps.at(i);
  std::vector<double> series;
  for (std::size_t k = 0; k <= t; ++k) series.push_back(rep.steps.at(k).gini);
  const std::vector<double> w(series.size(), 1.0);
  nlohmann::ordered_json j;
  j["round"] = rep.rounds.at(i).round;
  j["gini_spatial"] = rep.steps[t].gini;
  j["gini_temporal"] = gini_temporal(series, w);
  j["jain"] = optional_json(rep.steps[t].jain);
  j["mean_travel_time_min"] = optional_json(rep.steps[t].mean_travel_time_min);
  return j;
}

inline nlohmann::ordered_json to_json(const ReportSummary& s) {
  nlohmann::ordered_json j;
  j["steps"] = s.steps;
  j["vehicles"] = s.vehicles;
  j["assigned"] = s.assigned;
  j["unreachable"] = s.unreachable;
  j["mean_travel_time_min"] = optional_json(s.mean_travel_time_min);
  j["final_gini"] = optional_json(s.final_gini);
  j["fairness_score"] = optional_json(s.fairness_score);
  j["final_jain"] = optional_json(s.final_jain);
  j["uplink_bytes"] = s.uplink_bytes;
  j["downlink_bytes"] = s.downlink_bytes;
  j["total_bytes"] = s.total_bytes;
  j["epsilon_spent"] = s.epsilon_spent;
  j["rounds_completed"] = s.rounds_completed;
  j["budget_exhausted"] = s.budget_exhausted;
  j["final_loss"] = optional_json(s.final_loss);
  return j;
}

namespace detail {

inline std::optional<double> optional_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  require(j[key].is_number(), ErrorCode::IncompleteReport, std::string("summary field '") + key + "' is not a number");
  return j[key].get<double>();
}

inline std::string csv_optional(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + p.string());
  return out;
}

}  // namespace detail

inline ReportSummary summary_from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::IncompleteReport, "summary must be a JSON object");
  for (const char* key : {"steps", "mean_travel_time_min", "final_gini", "total_bytes", "epsilon_spent"})
    require(j.contains(key), ErrorCode::IncompleteReport, std::string("summary lacks '") + key + "'");
  ReportSummary s;
  s.steps = j["steps"].get<std::size_t>();
  s.mean_travel_time_min = detail::optional_number(j, "mean_travel_time_min");
  s.final_gini = detail::optional_number(j, "final_gini");
  s.fairness_score = detail::optional_number(j, "fairness_score");
  s.final_jain = detail::optional_number(j, "final_jain");
  s.total_bytes = j["total_bytes"].get<std::uint64_t>();
  s.uplink_bytes = j.value("uplink_bytes", std::uint64_t{0});
  s.downlink_bytes = j.value("downlink_bytes", std::uint64_t{0});
  s.epsilon_spent = j["epsilon_spent"].get<double>();
  s.rounds_completed = j.value("rounds_completed", std::size_t{0});
  s.budget_exhausted = j.value("budget_exhausted", false);
  s.final_loss = detail::optional_number(j, "final_loss");
  s.vehicles = j.value("vehicles", std::size_t{0});
  s.assigned = j.value("assigned", std::size_t{0});
  s.unreachable = j.value("unreachable", std::size_t{0});
  return s;
}

/// Writes steps.jsonl, rounds.jsonl, privacy.jsonl, metrics.jsonl and summary.json, plus
/// steps.csv, rounds.csv and assignments.csv when `emit_csv` is set.
inline std::vector<std::string> write_report(const ScenarioReport& rep, const std::filesystem::path& dir,
                                             bool emit_csv) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  {
    auto out = detail::open_out(dir / "steps.jsonl");
    for (const auto& s : rep.steps) out << to_json(s).dump() << '\n';
    written.push_back("steps.jsonl");
  }
  {
    auto out = detail::open_out(dir / "rounds.jsonl");
    for (const auto& r : rep.rounds) out << to_json(r).dump() << '\n';
    written.push_back("rounds.jsonl");
  }
  {
    auto out = detail::open_out(dir / "privacy.jsonl");
    for (const auto& r : rep.rounds) out << privacy_json(r, rep.delta).dump() << '\n';
    written.push_back("privacy.jsonl");
  }
  {
    auto out = detail::open_out(dir / "metrics.jsonl");
    for (std::size_t i = 0; i < rep.rounds.size(); ++i) out << metrics_json(rep, i).dump() << '\n';
    written.push_back("metrics.jsonl");
  }
  {
    auto out = detail::open_out(dir / "summary.json");
    out << to_json(rep.summary).dump(2) << '\n';
    written.push_back("summary.json");
  }
  if (!emit_csv) return written;
  {
    auto out = detail::open_out(dir / "steps.csv");
    out << "step,vehicles,assigned,unreachable,mean_travel_time_min,mean_edge_time_min,gini,jain,total_flow\n";
    for (const auto& s : rep.steps)
      out << s.step << ',' << s.vehicles << ',' << s.assigned << ',' << s.unreachable << ','
          << detail::csv_optional(s.mean_travel_time_min) << ',' << format_number(s.mean_edge_time_min) << ','
          << format_number(s.gini) << ',' << detail::csv_optional(s.jain) << ',' << format_number(s.total_flow)
          << '\n';
    written.push_back("steps.csv");
  }
  {
    auto out = detail::open_out(dir / "rounds.csv");
    out << "round,mean_loss,travel_time_min,gini,jain,epsilon_spent,uplink_bytes,downlink_bytes,bits,clip_norm,sigma\n";
    for (const auto& r : rep.rounds)
      out << r.round << ',' << format_number(r.mean_loss) << ',' << detail::csv_optional(r.travel_time_min) << ','
          << detail::csv_optional(r.gini) << ',' << detail::csv_optional(r.jain) << ','
          << format_number(r.epsilon_spent) << ',' << r.uplink_bytes << ',' << r.downlink_bytes << ',' << r.bits
          << ',' << format_number(r.clip_norm) << ',' << format_number(r.sigma) << '\n';
    written.push_back("rounds.csv");
  }
  {
    auto out = detail::open_out(dir / "assignments.csv");
    out << "step," << assignment_csv_header() << '\n';
    for (const auto& a : rep.assignments) out << a.step << ',' << assignment_csv_row(a.assignment) << '\n';
    written.push_back("assignments.csv");
  }
  return written;
}

// ---------------------------------------------------------------------------
// Comparison against reported baselines

struct BaselineRow {
  std::string name;
  std::optional<double> mean_travel_time_min;
  std::optional<double> gini;
  std::optional<double> total_mb;
  std::optional<double> epsilon_spent;
};

struct ComparisonRow {
  std::string baseline;
  std::string metric;
  std::optional<double> value;
  std::optional<double> baseline_value;
  std::optional<double> delta_pct;  // (value - baseline) / baseline * 100
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  const ComparisonRow* find(const std::string& baseline, const std::string& metric) const {
    for (const auto& r : rows)
      if (r.baseline == baseline && r.metric == metric) return &r;
    return nullptr;
  }

  std::string to_csv() const {
    std::string s = "baseline,metric,value,baseline_value,delta_pct\n";
    for (const auto& r : rows)
      s += r.baseline + "," + r.metric + "," + detail::csv_optional(r.value) + "," +
           detail::csv_optional(r.baseline_value) + "," + detail::csv_optional(r.delta_pct) + "\n";
    return s;
  }
};

inline std::optional<double> percent_delta(std::optional<double> value, std::optional<double> base) {
  if (!value || !base) return std::nullopt;
  if (*base == 0.0) return *value == 0.0 ? std::optional<double>(0.0) : std::nullopt;
  return (*value - *base) / *base * 100.0;
}

/// Mean travel time, final Gini, fairness score, total traffic and epsilon
/// against each baseline row; the metric values themselves are listed under
/// the pseudo-baseline "report".
inline ComparisonTable evaluate(const ReportSummary& s, std::span<const BaselineRow> baselines) {
  require(s.steps > 0 && s.final_gini.has_value(), ErrorCode::IncompleteReport, "report has no recorded steps");
  const std::optional<double> mb = static_cast<double>(s.total_bytes) / 1e6;
  ComparisonTable t;
  auto add = [&](const std::string& base, const std::string& metric, std::optional<double> v,
                 std::optional<double> b) { t.rows.push_back({base, metric, v, b, percent_delta(v, b)}); };
  add("report", "mean_travel_time_min", s.mean_travel_time_min, std::nullopt);
  add("report", "final_gini", s.final_gini, std::nullopt);
  add("report", "fairness_score", s.fairness_score, std::nullopt);
  add("report", "total_mb", mb, std::nullopt);
  add("report", "epsilon_spent", s.epsilon_spent, std::nullopt);
  for (const auto& b : baselines) {
    add(b.name, "mean_travel_time_min", s.mean_travel_time_min, b.mean_travel_time_min);
    add(b.name, "final_gini", s.final_gini, b.gini);
    add(b.name, "fairness_score", s.fairness_score,
        b.gini ? std::optional<double>(fairness_score(*b.gini)) : std::nullopt);
    add(b.name, "total_mb", mb, b.total_mb);
    add(b.name, "epsilon_spent", s.epsilon_spent, b.epsilon_spent);
  }
  return t;
}

/// Baseline rows from a CSV with header name,mean_travel_time_min,gini,total_mb,epsilon_spent;
/// empty cells mean "not reported".
inline std::vector<BaselineRow> read_baselines_csv(const std::string& path) {
  const auto rows = detail::read_csv(path, "name,mean_travel_time_min,gini,total_mb,epsilon_spent");
  std::vector<BaselineRow> out;
  std::size_t line_no = 1;
  for (const auto& r : rows) {
    ++line_no;
    auto cell = [&](std::size_t i) -> std::optional<double> {
      if (r[i].empty()) return std::nullopt;
      return detail::parse_double(r[i], line_no);
    };
    out.push_back({r[0], cell(1), cell(2), cell(3), cell(4)});
  }
  return out;
}

}  // namespace fedfair
