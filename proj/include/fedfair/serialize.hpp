#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedfair/error.hpp"
#include "fedfair/gnn.hpp"
#include "fedfair/network.hpp"

namespace fedfair {

inline nlohmann::ordered_json network_to_json(const RoadNetwork& net) {
  nlohmann::ordered_json j;
  j["nodes"] = net.labels();
  std::vector<std::vector<double>> attrs;
  for (NodeIndex v = 0; v < net.node_count(); ++v) attrs.push_back(net.node_attrs(v));
  j["node_attrs"] = attrs;
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : net.edges()) {
    nlohmann::ordered_json je;
    je["id"] = e.id;
    je["from"] = net.label(e.from);
    je["to"] = net.label(e.to);
    je["free_flow_time"] = e.free_flow_time;
    je["capacity"] = e.capacity;
    je["distance_miles"] = e.distance_miles;
    je["speed_limit_mph"] = e.speed_limit_mph;
    je["attrs"] = e.attrs;
    edges.push_back(std::move(je));
  }
  j["edges"] = std::move(edges);
  return j;
}

/// Inverse of network_to_json; edges are rebuilt in id order.
inline RoadNetwork network_from_json(const nlohmann::json& j) {
  try {
    const auto nodes = j.at("nodes").get<std::vector<std::string>>();
    const auto attrs = j.at("node_attrs").get<std::vector<std::vector<double>>>();
    std::vector<std::pair<std::size_t, EdgeSpec>> specs;
    for (const auto& je : j.at("edges")) {
      EdgeSpec s;
      s.from = je.at("from").get<std::string>();
      s.to = je.at("to").get<std::string>();
      s.free_flow_time = je.at("free_flow_time").get<double>();
      s.capacity = je.at("capacity").get<double>();
      s.distance_miles = je.at("distance_miles").get<double>();
      s.speed_limit_mph = je.at("speed_limit_mph").get<double>();
      s.attrs = je.at("attrs").get<std::vector<double>>();
      specs.emplace_back(je.at("id").get<std::size_t>(), std::move(s));
    }
    std::sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<EdgeSpec> edges;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      require(specs[i].first == i, ErrorCode::MalformedRow, "edge ids must be 0..n-1");
      edges.push_back(std::move(specs[i].second));
    }
    return build_network(nodes, edges, attrs);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedRow, std::string("network JSON: ") + e.what());
  }
}

inline bool same_network(const RoadNetwork& a, const RoadNetwork& b) {
  if (a.labels() != b.labels() || a.edge_count() != b.edge_count()) return false;
  for (NodeIndex v = 0; v < a.node_count(); ++v)
    if (a.node_attrs(v) != b.node_attrs(v)) return false;
  for (EdgeId e = 0; e < a.edge_count(); ++e) {
    const auto &x = a.edge(e), &y = b.edge(e);
    if (x.from != y.from || x.to != y.to || x.free_flow_time != y.free_flow_time || x.capacity != y.capacity ||
        x.distance_miles != y.distance_miles || x.speed_limit_mph != y.speed_limit_mph || x.attrs != y.attrs)
      return false;
  }
  return true;
}

inline std::string to_string(Aggregator a) { return a == Aggregator::Attention ? "attention" : "mean"; }

inline Aggregator aggregator_from_string(const std::string& s) {
  if (s == "attention") return Aggregator::Attention;
  if (s == "mean") return Aggregator::Mean;
  fail(ErrorCode::RangeViolation, "aggregator must be 'attention' or 'mean', got '" + s + "'");
}

/// Checkpoint: configuration, a shape manifest and the flat values of every tensor.
inline nlohmann::ordered_json model_to_json(const GnnModel& m) {
  const auto& c = m.config();
  nlohmann::ordered_json j;
  j["config"] = {{"feature_width", c.feature_width}, {"static_width", c.static_width},
                 {"edge_width", c.edge_width},       {"hidden", c.hidden},
                 {"layers", c.layers},               {"dropout", c.dropout},
                 {"aggregator", to_string(c.aggregator)}, {"leaky_slope", c.leaky_slope},
                 {"layernorm_eps", c.layernorm_eps}, {"speed_scale_mph", c.speed_scale_mph}};
  auto tensors = nlohmann::ordered_json::array();
  for (const auto& t : m.params().tensors())
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"values", t.values}});
  j["tensors"] = std::move(tensors);
  return j;
}

inline GnnModel model_from_json(const nlohmann::json& j) {
  try {
    const auto& jc = j.at("config");
    GnnConfig c;
    c.feature_width = jc.at("feature_width").get<std::size_t>();
    c.static_width = jc.at("static_width").get<std::size_t>();
    c.edge_width = jc.at("edge_width").get<std::size_t>();
    c.hidden = jc.at("hidden").get<std::size_t>();
    c.layers = jc.at("layers").get<std::size_t>();
    c.dropout = jc.at("dropout").get<double>();
    c.aggregator = aggregator_from_string(jc.at("aggregator").get<std::string>());
    c.leaky_slope = jc.at("leaky_slope").get<double>();
    c.layernorm_eps = jc.at("layernorm_eps").get<double>();
    c.speed_scale_mph = jc.at("speed_scale_mph").get<double>();
    GnnModel m(c);
    const auto& jt = j.at("tensors");
    require(jt.size() == m.params().tensor_count(), ErrorCode::CorruptPayload, "checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < jt.size(); ++i) {
      auto& t = m.params()[i];
      require(jt[i].at("name").get<std::string>() == t.name && jt[i].at("rows").get<std::size_t>() == t.rows &&
                  jt[i].at("cols").get<std::size_t>() == t.cols,
              ErrorCode::CorruptPayload, "checkpoint shape manifest mismatch at tensor " + t.name);
      auto values = jt[i].at("values").get<std::vector<double>>();
      require(values.size() == t.size(), ErrorCode::CorruptPayload, "checkpoint value count mismatch at " + t.name);
      t.values = std::move(values);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptPayload, std::string("checkpoint JSON: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  require(in.good(), ErrorCode::MissingFile, "cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::MalformedRow, p.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& p, const nlohmann::ordered_json& j) {
  std::ofstream out(p, std::ios::binary);
  require(out.good(), ErrorCode::Io, "cannot write " + p.string());
  out << j.dump(2) << '\n';
}

}  // namespace fedfair
