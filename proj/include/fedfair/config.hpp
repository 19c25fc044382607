#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedfair/error.hpp"
#include "fedfair/federated.hpp"
#include "fedfair/fixtures.hpp"
#include "fedfair/network.hpp"
#include "fedfair/routing.hpp"
#include "fedfair/serialize.hpp"
#include "fedfair/sim.hpp"

namespace fedfair {

/// Fully resolved run configuration. A flat JSON object maps one-to-one onto
/// these fields; `to_json` writes every field so a manifest can be fed back in.
struct RunConfig {
  // inputs
  std::optional<std::string> topology;
  std::optional<std::string> regions;
  std::optional<std::string> sensors;
  std::optional<std::string> state;
  std::optional<std::string> checkpoint;
  std::optional<std::string> report;
  std::optional<std::string> baselines;
  std::string fixture = "grid";  // used when no topology file is given: "grid" or "metr"
  std::optional<double> distance_threshold;
  double capacity = 2000.0;
  double speed_limit_mph = kDefaultSpeedLimitMph;

  std::uint64_t seed = 0;
  std::string output = "out";
  bool emit_csv = false;
  std::string command;

  ScenarioConfig scenario;
  std::vector<double> origin_region_weights;
  std::vector<double> destination_region_weights;
  FederatedConfig federated;
  ObjectiveWeights weights;

  nlohmann::ordered_json to_json() const;
};

namespace detail {

inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys{
      "topology",       "regions",          "sensors",         "state",
      "checkpoint",     "report",           "baselines",       "fixture",
      "distance_threshold", "capacity",     "speed_limit_mph", "seed",
      "output",         "emit_csv",         "command",         "horizon",
      "step_minutes",   "steps_per_round",  "demand_rate",     "observation_noise",
      "origin_region_weights", "destination_region_weights", "clients", "rounds",
      "local_epochs",   "participation",    "learning_rate",   "batch_size",
      "bits",           "rounding",         "initial_bits",    "adaptive_clip",
      "clip_alpha",     "clip_quantile",    "epsilon_budget",  "epsilon",
      "delta",          "clip_norm",        "noise_multiplier", "parallel",
      "beta",           "lambda",           "alphas",          "k",
      "diverse",        "hidden",           "layers",          "dropout",
      "aggregator"};
  return keys;
}

[[noreturn]] inline void bad_value(const std::string& key, const std::string& why) {
  fail(ErrorCode::RangeViolation, "config key '" + key + "': " + why);
}

inline double num(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number()) bad_value(key, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad_value(key, "must be finite");
  return v;
}

inline std::uint64_t count(const nlohmann::json& j, const std::string& key) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) bad_value(key, "must be >= 0");
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v >= 0.0 && v == std::floor(v) && v < 9.0e15) return static_cast<std::uint64_t>(v);
  }
  bad_value(key, "expected a non-negative integer");
}

inline std::string str(const nlohmann::json& j, const std::string& key) {
  if (!j.is_string()) bad_value(key, "expected a string");
  return j.get<std::string>();
}

inline bool boolean(const nlohmann::json& j, const std::string& key) {
  if (!j.is_boolean()) bad_value(key, "expected true or false");
  return j.get<bool>();
}

inline std::vector<double> numbers(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array()) bad_value(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(num(x, key));
  return out;
}

inline std::optional<double> opt_num(const nlohmann::json& j, const std::string& key) {
  if (j.is_null()) return std::nullopt;
  return num(j, key);
}

inline std::optional<std::string> opt_str(const nlohmann::json& j, const std::string& key) {
  if (j.is_null()) return std::nullopt;
  return str(j, key);
}

inline void check(bool ok, const std::string& key, const std::string& why) {
  if (!ok) bad_value(key, why);
}

}  // namespace detail

inline nlohmann::ordered_json RunConfig::to_json() const {
  auto opt = [](const auto& v) -> nlohmann::ordered_json {
    if (v) return *v;
    return nullptr;
  };
  const auto& fed = federated;
  nlohmann::ordered_json j;
  j["command"] = command;
  j["topology"] = opt(topology);
  j["regions"] = opt(regions);
  j["sensors"] = opt(sensors);
  j["state"] = opt(state);
  j["checkpoint"] = opt(checkpoint);
  j["report"] = opt(report);
  j["baselines"] = opt(baselines);
  j["fixture"] = fixture;
  j["distance_threshold"] = opt(distance_threshold);
  j["capacity"] = capacity;
  j["speed_limit_mph"] = speed_limit_mph;
  j["seed"] = seed;
  j["output"] = output;
  j["emit_csv"] = emit_csv;
  j["horizon"] = scenario.horizon;
  j["step_minutes"] = scenario.step_minutes;
  j["steps_per_round"] = scenario.steps_per_round;
  j["demand_rate"] = scenario.demand.rate;
  j["observation_noise"] = scenario.observation_noise;
  j["origin_region_weights"] = origin_region_weights;
  j["destination_region_weights"] = destination_region_weights;
  j["clients"] = fed.num_clients;
  j["rounds"] = fed.rounds;
  j["local_epochs"] = fed.local_epochs;
  j["participation"] = fed.participation;
  j["learning_rate"] = fed.learning_rate;
  j["batch_size"] = fed.batch_size;
  if (fed.quantization.rule == BitsRule::Adaptive)
    j["bits"] = "adaptive";
  else
    j["bits"] = fed.quantization.schedule;
  j["rounding"] = fed.quantization.rounding == RoundingMode::Stochastic ? "stochastic" : "deterministic";
  j["initial_bits"] = fed.quantization.initial_bits;
  j["adaptive_clip"] = fed.adaptive_clip.has_value();
  const AdaptiveClipConfig clip = fed.adaptive_clip.value_or(AdaptiveClipConfig{});
  j["clip_alpha"] = clip.alpha;
  j["clip_quantile"] = clip.quantile;
  j["epsilon_budget"] = opt(fed.epsilon_budget);
  j["epsilon"] = fed.privacy.epsilon;
  j["delta"] = fed.privacy.delta;
  j["clip_norm"] = fed.privacy.clip_norm;
  j["noise_multiplier"] = opt(fed.privacy.noise_multiplier);
  j["parallel"] = fed.parallel;
  j["beta"] = weights.beta;
  j["lambda"] = weights.lambda;
  j["alphas"] = {weights.alpha_spatial, weights.alpha_temporal, weights.alpha_demographic};
  j["k"] = scenario.k;
  j["diverse"] = scenario.diverse;
  j["hidden"] = scenario.hidden;
  j["layers"] = scenario.layers;
  j["dropout"] = scenario.dropout;
  j["aggregator"] = to_string(scenario.aggregator);
  return j;
}

/// Checks value ranges and that every named input file exists.
inline void validate(const RunConfig& c) {
  using detail::check;
  for (const auto* p : {&c.topology, &c.regions, &c.sensors, &c.state, &c.checkpoint, &c.report, &c.baselines})
    if (*p) require(std::filesystem::exists(**p), ErrorCode::MissingFile, "input file not found: " + **p);
  check(c.fixture == "grid" || c.fixture == "metr", "fixture", "must be 'grid' or 'metr'");
  check(!c.distance_threshold || *c.distance_threshold > 0.0, "distance_threshold", "must be > 0");
  check(c.capacity > 0.0, "capacity", "must be > 0");
  check(c.speed_limit_mph > 0.0, "speed_limit_mph", "must be > 0");
  check(!c.output.empty(), "output", "must not be empty");
  const auto& s = c.scenario;
  check(s.horizon >= 1, "horizon", "must be >= 1");
  check(s.step_minutes > 0.0, "step_minutes", "must be > 0");
  check(s.steps_per_round >= 1, "steps_per_round", "must be >= 1");
  check(s.demand.rate >= 0.0, "demand_rate", "must be >= 0");
  check(s.observation_noise >= 0.0, "observation_noise", "must be >= 0");
  for (double w : c.origin_region_weights) check(w >= 0.0, "origin_region_weights", "must be >= 0");
  for (double w : c.destination_region_weights) check(w >= 0.0, "destination_region_weights", "must be >= 0");
  check(s.k >= 1, "k", "must be >= 1");
  check(s.hidden >= 1, "hidden", "must be >= 1");
  check(s.layers >= 1, "layers", "must be >= 1");
  check(s.dropout >= 0.0 && s.dropout < 1.0, "dropout", "must be in [0,1)");
  const auto& f = c.federated;
  check(f.num_clients >= 1, "clients", "must be >= 1");
  check(f.rounds >= 1, "rounds", "must be >= 1");
  check(f.local_epochs >= 1, "local_epochs", "must be >= 1");
  check(f.participation > 0.0 && f.participation <= 1.0, "participation", "must be in (0,1]");
  check(f.learning_rate > 0.0, "learning_rate", "must be > 0");
  check(f.batch_size >= 1, "batch_size", "must be >= 1");
  for (unsigned b : f.quantization.schedule) check(b >= 1 && b <= 32, "bits", "must be in [1,32]");
  check(!f.quantization.schedule.empty(), "bits", "schedule must not be empty");
  check(f.quantization.initial_bits >= 1 && f.quantization.initial_bits <= 32, "initial_bits", "must be in [1,32]");
  if (f.adaptive_clip) {
    check(f.adaptive_clip->alpha >= 0.0 && f.adaptive_clip->alpha <= 1.0, "clip_alpha", "must be in [0,1]");
    check(f.adaptive_clip->quantile >= 0.5 && f.adaptive_clip->quantile <= 0.9, "clip_quantile",
          "must be in [0.5,0.9]");
  }
  check(!f.epsilon_budget || *f.epsilon_budget > 0.0, "epsilon_budget", "must be > 0");
  check(f.privacy.epsilon > 0.0, "epsilon", "must be > 0");
  check(f.privacy.delta > 0.0 && f.privacy.delta < 1.0, "delta", "must be in (0,1)");
  check(f.privacy.clip_norm > 0.0, "clip_norm", "must be > 0");
  check(!f.privacy.noise_multiplier || *f.privacy.noise_multiplier >= 0.0, "noise_multiplier", "must be >= 0");
  for (double b : c.weights.beta) check(b >= 0.0, "beta", "entries must be >= 0");
  check(c.weights.lambda >= 0.0 && c.weights.lambda <= 1.0, "lambda", "must be in [0,1]");
  check(c.weights.alpha_spatial >= 0.0 && c.weights.alpha_temporal >= 0.0 && c.weights.alpha_demographic >= 0.0,
        "alphas", "entries must be >= 0");
}

/// Applies the keys of a flat JSON object on top of `base`. Unknown keys are
/// rejected by name.
inline RunConfig apply_config_json(const nlohmann::json& j, RunConfig base = {}) {
  using namespace detail;
  require(j.is_object(), ErrorCode::RangeViolation, "config must be a JSON object");
  for (const auto& [key, _] : j.items())
    require(config_keys().count(key) > 0, ErrorCode::UnknownKey, "unknown config key '" + key + "'");
  RunConfig c = std::move(base);
  auto has = [&](const char* k) { return j.contains(k); };
  auto at = [&](const char* k) -> const nlohmann::json& { return j.at(k); };

  if (has("topology")) c.topology = opt_str(at("topology"), "topology");
  if (has("regions")) c.regions = opt_str(at("regions"), "regions");
  if (has("sensors")) c.sensors = opt_str(at("sensors"), "sensors");
  if (has("state")) c.state = opt_str(at("state"), "state");
  if (has("checkpoint")) c.checkpoint = opt_str(at("checkpoint"), "checkpoint");
  if (has("report")) c.report = opt_str(at("report"), "report");
  if (has("baselines")) c.baselines = opt_str(at("baselines"), "baselines");
  if (has("fixture")) c.fixture = str(at("fixture"), "fixture");
  if (has("distance_threshold")) c.distance_threshold = opt_num(at("distance_threshold"), "distance_threshold");
  if (has("capacity")) c.capacity = num(at("capacity"), "capacity");
  if (has("speed_limit_mph")) c.speed_limit_mph = num(at("speed_limit_mph"), "speed_limit_mph");
  if (has("seed")) c.seed = count(at("seed"), "seed");
  if (has("output")) c.output = str(at("output"), "output");
  if (has("emit_csv")) c.emit_csv = boolean(at("emit_csv"), "emit_csv");
  if (has("command")) c.command = str(at("command"), "command");

  auto& s = c.scenario;
  if (has("horizon")) s.horizon = count(at("horizon"), "horizon");
  if (has("step_minutes")) s.step_minutes = num(at("step_minutes"), "step_minutes");
  if (has("steps_per_round")) s.steps_per_round = count(at("steps_per_round"), "steps_per_round");
  if (has("demand_rate")) s.demand.rate = num(at("demand_rate"), "demand_rate");
  if (has("observation_noise")) s.observation_noise = num(at("observation_noise"), "observation_noise");
  if (has("origin_region_weights")) c.origin_region_weights = numbers(at("origin_region_weights"), "origin_region_weights");
  if (has("destination_region_weights"))
    c.destination_region_weights = numbers(at("destination_region_weights"), "destination_region_weights");
  if (has("k")) s.k = count(at("k"), "k");
  if (has("diverse")) s.diverse = count(at("diverse"), "diverse");
  if (has("hidden")) s.hidden = count(at("hidden"), "hidden");
  if (has("layers")) s.layers = count(at("layers"), "layers");
  if (has("dropout")) s.dropout = num(at("dropout"), "dropout");
  if (has("aggregator")) {
    const auto a = str(at("aggregator"), "aggregator");
    check(a == "attention" || a == "mean", "aggregator", "must be 'attention' or 'mean'");
    s.aggregator = aggregator_from_string(a);
  }

  auto& f = c.federated;
  if (has("clients")) f.num_clients = count(at("clients"), "clients");
  if (has("rounds")) f.rounds = count(at("rounds"), "rounds");
  if (has("local_epochs")) f.local_epochs = count(at("local_epochs"), "local_epochs");
  if (has("participation")) f.participation = num(at("participation"), "participation");
  if (has("learning_rate")) f.learning_rate = num(at("learning_rate"), "learning_rate");
  if (has("batch_size")) f.batch_size = count(at("batch_size"), "batch_size");
  if (has("bits")) {
    const auto& b = at("bits");
    if (b.is_string()) {
      check(b.get<std::string>() == "adaptive", "bits", "must be \"adaptive\", an integer or an array of integers");
      f.quantization.rule = BitsRule::Adaptive;
    } else {
      std::vector<unsigned> schedule;
      if (b.is_array()) {
        for (const auto& x : b) schedule.push_back(static_cast<unsigned>(std::min<std::uint64_t>(count(x, "bits"), 64)));
      } else {
        schedule.push_back(static_cast<unsigned>(std::min<std::uint64_t>(count(b, "bits"), 64)));
      }
      f.quantization.rule = BitsRule::Schedule;
      f.quantization.schedule = schedule;
    }
  }
  if (has("rounding")) {
    const auto r = str(at("rounding"), "rounding");
    check(r == "stochastic" || r == "deterministic", "rounding", "must be 'stochastic' or 'deterministic'");
    f.quantization.rounding = r == "stochastic" ? RoundingMode::Stochastic : RoundingMode::Deterministic;
  }
  if (has("initial_bits"))
    f.quantization.initial_bits = static_cast<unsigned>(std::min<std::uint64_t>(count(at("initial_bits"), "initial_bits"), 64));
  AdaptiveClipConfig clip = f.adaptive_clip.value_or(AdaptiveClipConfig{});
  bool clip_on = f.adaptive_clip.has_value();
  if (has("adaptive_clip")) clip_on = boolean(at("adaptive_clip"), "adaptive_clip");
  if (has("clip_alpha")) clip.alpha = num(at("clip_alpha"), "clip_alpha");
  if (has("clip_quantile")) clip.quantile = num(at("clip_quantile"), "clip_quantile");
  f.adaptive_clip = clip_on ? std::optional<AdaptiveClipConfig>(clip) : std::nullopt;
  if (has("epsilon_budget")) f.epsilon_budget = opt_num(at("epsilon_budget"), "epsilon_budget");
  if (has("epsilon")) f.privacy.epsilon = num(at("epsilon"), "epsilon");
  if (has("delta")) f.privacy.delta = num(at("delta"), "delta");
  if (has("clip_norm")) f.privacy.clip_norm = num(at("clip_norm"), "clip_norm");
  if (has("noise_multiplier")) f.privacy.noise_multiplier = opt_num(at("noise_multiplier"), "noise_multiplier");
  if (has("parallel")) f.parallel = boolean(at("parallel"), "parallel");

  if (has("beta")) {
    const auto b = numbers(at("beta"), "beta");
    check(b.size() == 4, "beta", "expected 4 entries (time, spatial, demographic, emissions)");
    std::copy(b.begin(), b.end(), c.weights.beta.begin());
  }
  if (has("lambda")) c.weights.lambda = num(at("lambda"), "lambda");
  if (has("alphas")) {
    const auto a = numbers(at("alphas"), "alphas");
    check(a.size() == 3, "alphas", "expected 3 entries (spatial, temporal, demographic)");
    c.weights.alpha_spatial = a[0];
    c.weights.alpha_temporal = a[1];
    c.weights.alpha_demographic = a[2];
  }
  s.seed = c.seed;
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingFile, "config file not found: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::RangeViolation, path + ": " + e.what());
  }
  RunConfig c = apply_config_json(j);
  validate(c);
  return c;
}

/// Network, regions and demographics described by a config.
struct World {
  RoadNetwork net;
  RegionPartition partition;
  SegmentDemographics demographics;
  bool has_regions = false;
};

inline World load_world(const RunConfig& c) {
  World w;
  if (c.topology) {
    TopologyOptions opts;
    if (c.distance_threshold) opts.distance_threshold = *c.distance_threshold;
    opts.capacity = c.capacity;
    opts.speed_limit_mph = c.speed_limit_mph;
    std::vector<RegionRow> rows;
    if (c.regions) {
      rows = read_regions_csv(*c.regions);
      for (const auto& r : rows) opts.extra_nodes.push_back(r.sensor_id);
    }
    w.net = network_from_topology(read_topology_csv(*c.topology), opts);
    if (c.regions) {
      std::tie(w.partition, w.demographics) = regions_from_rows(w.net, rows);
      w.has_regions = true;
    } else {
      w.partition = assign_regions(w.net, std::vector<RegionId>(w.net.node_count(), 0));
      w.demographics = SegmentDemographics::uniform(w.net.node_count());
    }
    return w;
  }
  if (c.fixture == "metr") {
    TopologyOptions opts;
    opts.capacity = c.capacity;
    opts.speed_limit_mph = c.speed_limit_mph;
    w.net = network_from_topology(fixtures::metr_topology(), opts);
    std::tie(w.partition, w.demographics) = regions_from_rows(w.net, fixtures::metr_regions());
  } else {
    auto g = fixtures::grid_fixture(c.federated.num_clients, c.seed);
    w.net = std::move(g.net);
    w.partition = std::move(g.partition);
    w.demographics = std::move(g.demographics);
  }
  w.has_regions = true;
  return w;
}

inline ScenarioConfig scenario_for(const RunConfig& c, const World& w) {
  ScenarioConfig s = c.scenario;
  s.seed = c.seed;
  if (!c.origin_region_weights.empty()) s.demand.origin_weights = region_weighted(w.partition, c.origin_region_weights);
  if (!c.destination_region_weights.empty())
    s.demand.destination_weights = region_weighted(w.partition, c.destination_region_weights);
  return s;
}

}  // namespace fedfair
