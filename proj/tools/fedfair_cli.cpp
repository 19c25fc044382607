#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedfair/config.hpp"
#include "fedfair/format.hpp"
#include "fedfair/serialize.hpp"
#include "fedfair/sim.hpp"

namespace fs = std::filesystem;
using namespace fedfair;

namespace {

// Flags shared by every subcommand; each one overrides the config key of the same name.
struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t rounds = 0;
  std::size_t clients = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double clip_norm = 0.0;
  double lambda = 0.0;
  std::string output;
  bool emit_csv = false;
  std::string topology, regions, sensors, state, checkpoint, report, baselines, fixture;
  double threshold = 0.0;

  std::vector<std::pair<std::string, CLI::Option*>> options;

  bool given(const std::string& name) const {
    for (const auto& [n, o] : options)
      if (n == name && o->count() > 0) return true;
    return false;
  }
};

void add_flags(CLI::App* sub, Flags& f) {
  auto add = [&](const std::string& name, auto& target, const std::string& help) {
    f.options.emplace_back(name, sub->add_option("--" + name, target, help));
  };
  add("config", f.config, "JSON config file");
  add("seed", f.seed, "master seed");
  add("rounds", f.rounds, "federated rounds");
  add("clients", f.clients, "number of clients (one per region)");
  add("epsilon", f.epsilon, "per-round privacy epsilon");
  add("delta", f.delta, "privacy delta");
  add("clip-norm", f.clip_norm, "gradient clipping norm C");
  add("lambda", f.lambda, "efficiency/fairness trade-off in [0,1]");
  add("output", f.output, "output directory");
  f.options.emplace_back("emit-csv", sub->add_flag("--emit-csv", f.emit_csv, "also write CSV exports"));
  add("topology", f.topology, "topology CSV (from,to,distance_miles)");
  add("regions", f.regions, "regions CSV (sensor_id,region_id,vulnerability,weight)");
  add("sensors", f.sensors, "sensor CSV (timestamp,sensor_id,speed_mph)");
  add("fixture", f.fixture, "built-in network when no topology is given: grid or metr");
  add("threshold", f.threshold, "distance threshold in miles for topology edges");
}

RunConfig resolve(const Flags& f, const std::string& command) {
  RunConfig c;
  if (f.given("config")) c = apply_config_json(read_json_file(f.config));
  if (f.given("seed")) c.seed = f.seed;
  if (f.given("rounds")) c.federated.rounds = f.rounds;
  if (f.given("clients")) c.federated.num_clients = f.clients;
  if (f.given("epsilon")) c.federated.privacy.epsilon = f.epsilon;
  if (f.given("delta")) c.federated.privacy.delta = f.delta;
  if (f.given("clip-norm")) c.federated.privacy.clip_norm = f.clip_norm;
  if (f.given("lambda")) c.weights.lambda = f.lambda;
  if (f.given("output")) c.output = f.output;
  if (f.given("emit-csv")) c.emit_csv = f.emit_csv;
  if (f.given("topology")) c.topology = f.topology;
  if (f.given("regions")) c.regions = f.regions;
  if (f.given("sensors")) c.sensors = f.sensors;
  if (f.given("state")) c.state = f.state;
  if (f.given("checkpoint")) c.checkpoint = f.checkpoint;
  if (f.given("report")) c.report = f.report;
  if (f.given("baselines")) c.baselines = f.baselines;
  if (f.given("fixture")) c.fixture = f.fixture;
  if (f.given("threshold")) c.distance_threshold = f.threshold;
  c.scenario.seed = c.seed;
  c.command = command;
  validate(c);
  return c;
}

fs::path prepare_output(const RunConfig& c) {
  const fs::path out(c.output);
  fs::create_directories(out);
  write_json_file(out / "manifest.json", c.to_json());
  return out;
}

void print_summary(const ReportSummary& s) {
  const auto j = to_json(s);
  for (const auto& [k, v] : j.items()) {
    std::string text = v.is_number_float() ? format_number(v.get<double>()) : v.dump();
    std::cout << k << ' ' << text << '\n';
  }
}

int cmd_ingest(const RunConfig& c) {
  const auto w = load_world(c);
  const auto out = prepare_output(c);
  const double density = network_density(w.net, DensityMode::Undirected);
  std::size_t undirected = 0;
  {
    std::set<std::pair<NodeIndex, NodeIndex>> pairs;
    for (const auto& e : w.net.edges())
      if (e.from != e.to) pairs.emplace(std::min(e.from, e.to), std::max(e.from, e.to));
    undirected = pairs.size();
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", density);
  std::cout << "nodes " << w.net.node_count() << '\n'
            << "edges " << w.net.edge_count() << '\n'
            << "undirected_edges " << undirected << '\n'
            << "density " << buf << '\n'
            << "density_exact " << format_number(density) << '\n';
  if (w.has_regions) {
    std::cout << "regions " << w.partition.region_count() << '\n';
    for (RegionId r = 0; r < w.partition.region_count(); ++r)
      std::cout << "region_" << r << "_size " << w.partition.region_size(r) << '\n';
  }
  if (c.sensors) {
    const auto series = ingest_sensor_csv(*c.sensors);
    std::size_t readings = 0, gaps = 0;
    for (const auto& s : series) {
      readings += s.readings.size();
      gaps += s.gap_count();
    }
    std::cout << "sensors " << series.size() << '\n' << "readings " << readings << '\n' << "gaps " << gaps << '\n';
  }
  write_json_file(out / "network.json", network_to_json(w.net));
  write_topology_csv(w.net, (out / "topology.csv").string());
  if (w.has_regions) write_regions_csv(w.net, w.partition, w.demographics, (out / "regions.csv").string());
  return 0;
}

int cmd_simulate(const RunConfig& c, bool train_only) {
  const auto w = load_world(c);
  const Scenario sc{w.net, w.partition, w.demographics, scenario_for(c, w)};
  const auto out = prepare_output(c);
  for (const auto& msg : c.federated.privacy.warnings()) std::cerr << "warning: " << msg << '\n';
  const auto rep = train_only ? run_training(sc, c.federated) : run_scenario(sc, c.federated, c.weights);
  write_report(rep, out, c.emit_csv);
  write_json_file(out / "model.json", model_to_json(rep.final_model));
  print_summary(rep.summary);
  return 0;
}

int cmd_route(const RunConfig& c) {
  const auto w = load_world(c);
  const auto sc = scenario_for(c, w);
  TrafficState state = free_flow_state(w.net);
  if (c.state) {
    const auto j = read_json_file(*c.state);
    require(j.contains("flows") && j["flows"].is_array(), ErrorCode::MissingState, "state file needs a 'flows' array");
    const auto flows = j["flows"].get<std::vector<double>>();
    require(flows.size() == w.net.edge_count(), ErrorCode::MissingState, "state must give one flow per edge");
    state = state_from_flows(w.net, flows, 0);
  }
  std::vector<double> predicted;
  if (c.checkpoint) {
    predicted = predict_times(model_from_json(read_json_file(*c.checkpoint)), w.net, state);
  } else {
    for (const auto& es : state.edges) predicted.push_back(es.travel_time);
  }
  const auto out = prepare_output(c);
  AssignOptions opts;
  opts.k = sc.k;
  opts.diverse = sc.diverse;
  opts.flow_increment = sc.flow_increment();
  opts.congestion = [](const Edge& e, double flow) { return ground_truth_time(e, flow); };
  const auto requests = generate_demand(sc.demand, w.net, 0, c.seed);
  const auto res = assign_routes(w.net, w.partition, w.demographics, requests, state, predicted, c.weights, opts);
  write_assignments_csv(res.assignments, (out / "assignments.csv").string());
  const auto loads = region_load(res.state, w.partition, w.net);
  std::cout << "vehicles " << requests.size() << '\n'
            << "unreachable " << res.unreachable << '\n'
            << "gini " << format_number(w.partition.region_count() >= 2 ? gini_or_zero(loads) : 0.0) << '\n';
  return 0;
}

int cmd_report(const RunConfig& c) {
  require(c.report.has_value(), ErrorCode::IncompleteReport, "report needs --report <summary.json>");
  const auto summary = summary_from_json(read_json_file(*c.report));
  std::vector<BaselineRow> baselines;
  if (c.baselines) baselines = read_baselines_csv(*c.baselines);
  const auto table = evaluate(summary, baselines);
  const auto out = prepare_output(c);
  std::ofstream(out / "comparison.csv", std::ios::binary) << table.to_csv();
  std::cout << table.to_csv();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated, privacy-preserving and fairness-aware traffic routing simulator", "fedfair"};
  app.require_subcommand(1);
  Flags flags;
  auto* ingest = app.add_subcommand("ingest", "build a network from CSVs or a fixture and print its density");
  auto* simulate = app.add_subcommand("simulate", "run the closed-loop scenario and write reports");
  auto* train = app.add_subcommand("train", "run federated rounds only, without routing");
  auto* route = app.add_subcommand("route", "assign one step of demand on a given traffic state");
  auto* report = app.add_subcommand("report", "compare a report summary with baseline rows");
  for (auto* sub : {ingest, simulate, train, route, report}) add_flags(sub, flags);
  flags.options.emplace_back("state", route->add_option("--state", flags.state, "JSON file with per-edge 'flows'"));
  flags.options.emplace_back("checkpoint",
                             route->add_option("--checkpoint", flags.checkpoint, "model checkpoint for predictions"));
  flags.options.emplace_back("report", report->add_option("--report", flags.report, "summary.json to evaluate"));
  flags.options.emplace_back("baselines", report->add_option("--baselines", flags.baselines,
                                                             "CSV: name,mean_travel_time_min,gini,total_mb,epsilon_spent"));

  if (argc <= 1) {
    std::cerr << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*ingest) return cmd_ingest(resolve(flags, "ingest"));
    if (*simulate) return cmd_simulate(resolve(flags, "simulate"), false);
    if (*train) return cmd_simulate(resolve(flags, "train"), true);
    if (*route) return cmd_route(resolve(flags, "route"));
    if (*report) return cmd_report(resolve(flags, "report"));
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
