#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fedfair/error.hpp"

namespace fedfair {

using NodeIndex = std::size_t;
using EdgeId = std::size_t;
using RegionId = std::size_t;

inline constexpr double kDefaultSpeedLimitMph = 60.0;

/// Edge description accepted by build_network. Attributes may be left empty,
/// in which case the network derives them from free-flow times.
struct EdgeSpec {
  std::string from;
  std::string to;
  double free_flow_time = 0.0;  // minutes
  double capacity = 0.0;        // vehicles per hour
  double distance_miles = 0.0;  // 0 derives distance from free-flow time at the speed limit
  double speed_limit_mph = kDefaultSpeedLimitMph;
  std::vector<double> attrs;
};

struct Edge {
  EdgeId id = 0;
  NodeIndex from = 0;
  NodeIndex to = 0;
  double free_flow_time = 0.0;
  double capacity = 0.0;
  double distance_miles = 0.0;
  double speed_limit_mph = kDefaultSpeedLimitMph;
  std::vector<double> attrs;
};

/// Weighted directed road graph. Immutable after construction.
class RoadNetwork {
 public:
  RoadNetwork() = default;

  std::size_t node_count() const { return labels_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(NodeIndex v) const { return labels_.at(v); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_.at(e); }

  std::optional<NodeIndex> find(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  NodeIndex index_of(std::string_view label) const {
    auto v = find(label);
    require(v.has_value(), ErrorCode::DanglingEdge, "unknown node '" + std::string(label) + "'");
    return *v;
  }

  const std::vector<EdgeId>& out_edges(NodeIndex v) const { return out_.at(v); }
  const std::vector<EdgeId>& in_edges(NodeIndex v) const { return in_.at(v); }

  const std::vector<double>& node_attrs(NodeIndex v) const { return node_attrs_.at(v); }
  std::size_t node_attr_width() const { return node_attrs_.empty() ? 0 : node_attrs_.front().size(); }
  std::size_t edge_attr_width() const { return edges_.empty() ? 0 : edges_.front().attrs.size(); }

  /// Edge from u to v, if any (first by id).
  std::optional<EdgeId> edge_between(NodeIndex u, NodeIndex v) const {
    for (EdgeId e : out_.at(u))
      if (edges_[e].to == v) return e;
    return std::nullopt;
  }

  friend RoadNetwork build_network(const std::vector<std::string>& nodes, const std::vector<EdgeSpec>& edges,
                                   const std::vector<std::vector<double>>& node_attrs);

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeId>> out_;
  std::vector<std::vector<EdgeId>> in_;
  std::vector<std::vector<double>> node_attrs_;
};

/// Validates and indexes a road graph. Edge ids follow input order.
inline RoadNetwork build_network(const std::vector<std::string>& nodes, const std::vector<EdgeSpec>& edges,
                                 const std::vector<std::vector<double>>& node_attrs = {}) {
  RoadNetwork net;
  net.labels_ = nodes;
  for (NodeIndex i = 0; i < nodes.size(); ++i) {
    auto [it, inserted] = net.index_.emplace(nodes[i], i);
    require(inserted, ErrorCode::MalformedRow, "duplicate node '" + nodes[i] + "'");
  }
  net.out_.assign(nodes.size(), {});
  net.in_.assign(nodes.size(), {});

  const bool derive_edge_attrs =
      std::all_of(edges.begin(), edges.end(), [](const EdgeSpec& e) { return e.attrs.empty(); });
  double max_fft = 0.0;
  for (const auto& spec : edges) max_fft = std::max(max_fft, spec.free_flow_time);

  net.edges_.reserve(edges.size());
  for (const auto& spec : edges) {
    auto from = net.find(spec.from);
    auto to = net.find(spec.to);
    require(from && to, ErrorCode::DanglingEdge, "edge " + spec.from + "->" + spec.to + " references undeclared node");
    require(spec.free_flow_time > 0.0 && spec.capacity > 0.0 && spec.speed_limit_mph > 0.0,
            ErrorCode::NonPositiveWeight, "edge " + spec.from + "->" + spec.to);
    require(spec.distance_miles >= 0.0, ErrorCode::NonPositiveWeight, "negative distance");
    Edge e;
    e.id = net.edges_.size();
    e.from = *from;
    e.to = *to;
    e.free_flow_time = spec.free_flow_time;
    e.capacity = spec.capacity;
    e.speed_limit_mph = spec.speed_limit_mph;
    e.distance_miles =
        spec.distance_miles > 0.0 ? spec.distance_miles : spec.free_flow_time / 60.0 * spec.speed_limit_mph;
    e.attrs = derive_edge_attrs ? std::vector<double>{spec.free_flow_time / max_fft} : spec.attrs;
    require(e.attrs.size() == edges.front().attrs.size() || derive_edge_attrs, ErrorCode::WidthMismatch,
            "edge attribute widths differ");
    net.out_[e.from].push_back(e.id);
    net.in_[e.to].push_back(e.id);
    net.edges_.push_back(std::move(e));
  }

  if (node_attrs.empty()) {
    std::size_t max_deg = 1;
    for (const auto& o : net.out_) max_deg = std::max(max_deg, o.size());
    net.node_attrs_.resize(nodes.size());
    for (NodeIndex v = 0; v < nodes.size(); ++v)
      net.node_attrs_[v] = {static_cast<double>(net.out_[v].size()) / static_cast<double>(max_deg)};
  } else {
    require(node_attrs.size() == nodes.size(), ErrorCode::WidthMismatch, "node attribute count");
    for (const auto& a : node_attrs)
      require(a.size() == node_attrs.front().size(), ErrorCode::WidthMismatch, "node attribute widths differ");
    net.node_attrs_ = node_attrs;
  }
  return net;
}

enum class DensityMode { Directed, Undirected };

/// Undirected: distinct unordered adjacent pairs over |V|(|V|-1)/2.
/// Directed: edge count over |V|(|V|-1).
inline double network_density(const RoadNetwork& net, DensityMode mode) {
  const double n = static_cast<double>(net.node_count());
  require(net.node_count() >= 2, ErrorCode::TooFewNodes, "density needs at least two nodes");
  if (mode == DensityMode::Directed) return static_cast<double>(net.edge_count()) / (n * (n - 1.0));
  std::set<std::pair<NodeIndex, NodeIndex>> pairs;
  for (const auto& e : net.edges()) {
    if (e.from == e.to) continue;
    pairs.emplace(std::min(e.from, e.to), std::max(e.from, e.to));
  }
  return static_cast<double>(pairs.size()) / (n * (n - 1.0) / 2.0);
}

// ---------------------------------------------------------------------------
// Regions

class RegionPartition {
 public:
  RegionPartition() = default;
  RegionPartition(std::vector<std::vector<NodeIndex>> regions, std::vector<RegionId> region_of)
      : regions_(std::move(regions)), region_of_(std::move(region_of)) {}

  std::size_t region_count() const { return regions_.size(); }
  std::size_t region_size(RegionId r) const { return regions_.at(r).size(); }
  const std::vector<NodeIndex>& members(RegionId r) const { return regions_.at(r); }
  RegionId region_of(NodeIndex v) const { return region_of_.at(v); }
  const std::vector<RegionId>& region_map() const { return region_of_; }

  /// Edges are owned by the region of their tail node.
  RegionId region_of_edge(const RoadNetwork& net, EdgeId e) const { return region_of_.at(net.edge(e).from); }

  std::vector<EdgeId> edges_of(const RoadNetwork& net, RegionId r) const {
    std::vector<EdgeId> out;
    for (const auto& e : net.edges())
      if (region_of_.at(e.from) == r) out.push_back(e.id);
    return out;
  }

 private:
  std::vector<std::vector<NodeIndex>> regions_;
  std::vector<RegionId> region_of_;
};

/// Builds a partition from a total node->region map. Region ids must be
/// dense: every id in [0, max] needs at least one member.
inline RegionPartition assign_regions(const RoadNetwork& net, const std::map<std::string, RegionId>& mapping) {
  std::vector<RegionId> region_of(net.node_count());
  RegionId max_id = 0;
  for (NodeIndex v = 0; v < net.node_count(); ++v) {
    auto it = mapping.find(net.label(v));
    require(it != mapping.end(), ErrorCode::UncoveredNode, "node '" + net.label(v) + "' has no region");
    region_of[v] = it->second;
    max_id = std::max(max_id, it->second);
  }
  for (const auto& [label, region] : mapping)
    require(net.find(label).has_value(), ErrorCode::DanglingEdge, "region map names unknown node '" + label + "'");
  std::vector<std::vector<NodeIndex>> regions(net.node_count() == 0 ? 0 : max_id + 1);
  for (NodeIndex v = 0; v < net.node_count(); ++v) regions[region_of[v]].push_back(v);
  for (RegionId r = 0; r < regions.size(); ++r)
    require(!regions[r].empty(), ErrorCode::EmptyRegion, "region " + std::to_string(r) + " is empty");
  require(!regions.empty(), ErrorCode::EmptyRegion, "no regions");
  return RegionPartition(std::move(regions), std::move(region_of));
}

inline RegionPartition assign_regions(const RoadNetwork& net, const std::vector<RegionId>& region_of) {
  require(region_of.size() == net.node_count(), ErrorCode::UncoveredNode, "region map does not cover all nodes");
  std::map<std::string, RegionId> m;
  for (NodeIndex v = 0; v < net.node_count(); ++v) m[net.label(v)] = region_of[v];
  return assign_regions(net, m);
}

struct SegmentDemographics {
  std::vector<double> weight;         // per node, >= 0
  std::vector<double> vulnerability;  // per node, in [0, 1]

  std::size_t size() const { return weight.size(); }

  void validate(const RoadNetwork& net) const {
    require(weight.size() == net.node_count() && vulnerability.size() == net.node_count(),
            ErrorCode::MissingDemographics, "demographics must cover every node");
    for (std::size_t i = 0; i < weight.size(); ++i) {
      require(weight[i] >= 0.0, ErrorCode::RangeViolation, "negative segment weight");
      require(vulnerability[i] >= 0.0 && vulnerability[i] <= 1.0, ErrorCode::RangeViolation,
              "vulnerability outside [0,1]");
    }
  }

  static SegmentDemographics uniform(std::size_t nodes, double weight = 1.0, double vulnerability = 0.0) {
    return {std::vector<double>(nodes, weight), std::vector<double>(nodes, vulnerability)};
  }
};

// ---------------------------------------------------------------------------
// Traffic state

struct EdgeState {
  double flow = 0.0;         // vehicles per hour
  double speed_mph = 0.0;
  double travel_time = 0.0;  // minutes
  double density = 0.0;      // flow / capacity
};

struct TrafficState {
  std::int64_t time_step = 0;
  std::vector<EdgeState> edges;

  std::vector<double> flows() const {
    std::vector<double> f(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) f[i] = edges[i].flow;
    return f;
  }
};

inline TrafficState free_flow_state(const RoadNetwork& net) {
  TrafficState s;
  s.edges.resize(net.edge_count());
  for (const auto& e : net.edges()) {
    s.edges[e.id].speed_mph = e.speed_limit_mph;
    s.edges[e.id].travel_time = e.free_flow_time;
  }
  return s;
}

// ---------------------------------------------------------------------------
// CSV helpers and file formats

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
  }
  return out;
}

inline double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v), ErrorCode::MalformedRow,
          "line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
  return v;
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path, std::string_view header) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingFile, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::MalformedRow, path + ": empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  while (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == header, ErrorCode::MalformedRow, path + ": expected header '" + std::string(header) + "'");
  const std::size_t width = split_csv_line(header).size();
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    require(fields.size() == width, ErrorCode::MalformedRow,
            path + " line " + std::to_string(line_no) + ": expected " + std::to_string(width) + " columns");
    rows.push_back(std::move(fields));
  }
  return rows;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

}  // namespace detail

/// Parses `YYYY-MM-DDTHH:MM[:SS][Z]` (a space may replace the `T`) into
/// seconds since the Unix epoch.
inline std::optional<std::int64_t> parse_iso8601(std::string_view s) {
  auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    if (pos + len > s.size()) return std::nullopt;
    int v = 0;
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (ec != std::errc() || p != s.data() + pos + len) return std::nullopt;
    return v;
  };
  if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
    return std::nullopt;
  auto y = num(0, 4), mo = num(5, 2), d = num(8, 2), h = num(11, 2), mi = num(14, 2);
  std::optional<int> sec = 0;
  std::size_t end = 16;
  if (s.size() >= 19 && s[16] == ':') {
    sec = num(17, 2);
    end = 19;
  }
  if (end < s.size() && s[end] == 'Z') ++end;
  if (!y || !mo || !d || !h || !mi || !sec || end != s.size()) return std::nullopt;
  if (*mo < 1 || *mo > 12 || *d < 1 || *d > 31 || *h > 23 || *mi > 59 || *sec > 60) return std::nullopt;
  return detail::days_from_civil(*y, static_cast<unsigned>(*mo), static_cast<unsigned>(*d)) * 86400 +
         *h * 3600 + *mi * 60 + *sec;
}

struct Reading {
  std::int64_t timestamp = 0;  // seconds since epoch
  std::optional<double> speed_mph;
};

struct SensorSeries {
  std::string sensor_id;
  std::vector<Reading> readings;

  std::size_t gap_count() const {
    return static_cast<std::size_t>(
        std::count_if(readings.begin(), readings.end(), [](const Reading& r) { return !r.speed_mph; }));
  }
};

struct SensorCsvOptions {
  bool zero_is_missing = true;
  std::size_t max_interpolated_gap = 3;
};

/// Fills runs of at most `max_gap` missing readings by linear interpolation
/// between the bounding observations. Longer runs and runs touching either
/// end of the series stay missing.
inline void interpolate_gaps(SensorSeries& series, std::size_t max_gap) {
  auto& r = series.readings;
  std::size_t i = 0;
  while (i < r.size()) {
    if (r[i].speed_mph) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < r.size() && !r[j].speed_mph) ++j;
    const std::size_t len = j - i;
    if (i > 0 && j < r.size() && len <= max_gap) {
      const double a = *r[i - 1].speed_mph, b = *r[j].speed_mph;
      for (std::size_t k = i; k < j; ++k) {
        const double t = static_cast<double>(k - i + 1) / static_cast<double>(len + 1);
        r[k].speed_mph = a + (b - a) * t;
      }
    }
    i = j;
  }
}

/// Reads `timestamp,sensor_id,speed_mph`. Series come out in order of each
/// sensor's first appearance.
inline std::vector<SensorSeries> ingest_sensor_csv(const std::string& path, const SensorCsvOptions& opts = {}) {
  auto rows = detail::read_csv(path, "timestamp,sensor_id,speed_mph");
  std::vector<SensorSeries> out;
  std::unordered_map<std::string, std::size_t> slot;
  std::size_t line_no = 1;
  for (const auto& row : rows) {
    ++line_no;
    auto ts = parse_iso8601(row[0]);
    require(ts.has_value(), ErrorCode::MalformedRow, path + " line " + std::to_string(line_no) + ": bad timestamp");
    require(!row[1].empty(), ErrorCode::MalformedRow, path + " line " + std::to_string(line_no) + ": empty sensor");
    Reading reading{*ts, std::nullopt};
    if (!row[2].empty()) {
      const double v = detail::parse_double(row[2], line_no);
      require(v >= 0.0, ErrorCode::MalformedRow, "negative speed on line " + std::to_string(line_no));
      if (!(opts.zero_is_missing && v == 0.0)) reading.speed_mph = v;
    }
    auto [it, inserted] = slot.emplace(row[1], out.size());
    if (inserted) out.push_back(SensorSeries{row[1], {}});
    auto& series = out[it->second];
    require(series.readings.empty() || series.readings.back().timestamp < reading.timestamp,
            ErrorCode::NonMonotonicTimestamps,
            "sensor " + row[1] + " timestamps not strictly increasing at line " + std::to_string(line_no));
    series.readings.push_back(reading);
  }
  for (auto& s : out) interpolate_gaps(s, opts.max_interpolated_gap);
  return out;
}

struct TopologyRow {
  std::string from;
  std::string to;
  double distance_miles = 0.0;
};

inline std::vector<TopologyRow> read_topology_csv(const std::string& path) {
  auto rows = detail::read_csv(path, "from,to,distance_miles");
  std::vector<TopologyRow> out;
  out.reserve(rows.size());
  std::size_t line_no = 1;
  for (const auto& r : rows) {
    ++line_no;
    require(!r[0].empty() && !r[1].empty(), ErrorCode::MalformedRow, "line " + std::to_string(line_no));
    out.push_back({r[0], r[1], detail::parse_double(r[2], line_no)});
  }
  return out;
}

struct TopologyOptions {
  double distance_threshold = std::numeric_limits<double>::infinity();
  double speed_limit_mph = kDefaultSpeedLimitMph;
  double capacity = 2000.0;
  std::vector<std::string> extra_nodes;  // sensors without any adjacency
};

/// Builds the sensor graph from a distance list: every pair within the
/// threshold becomes one undirected adjacency stored as two directed edges.
/// Nodes appear in order of first mention; duplicate pairs keep the shorter
/// distance.
inline RoadNetwork network_from_topology(const std::vector<TopologyRow>& rows, const TopologyOptions& opts = {}) {
  std::vector<std::string> nodes;
  std::unordered_map<std::string, std::size_t> seen;
  auto touch = [&](const std::string& s) {
    if (seen.emplace(s, nodes.size()).second) nodes.push_back(s);
  };
  std::map<std::pair<std::size_t, std::size_t>, double> pairs;
  for (const auto& r : rows) {
    touch(r.from);
    touch(r.to);
    if (r.from == r.to || !(r.distance_miles <= opts.distance_threshold)) continue;
    require(r.distance_miles > 0.0, ErrorCode::NonPositiveWeight, "distance must be positive: " + r.from + "," + r.to);
    auto a = seen[r.from], b = seen[r.to];
    auto key = std::make_pair(std::min(a, b), std::max(a, b));
    auto [it, inserted] = pairs.emplace(key, r.distance_miles);
    if (!inserted) it->second = std::min(it->second, r.distance_miles);
  }
  for (const auto& s : opts.extra_nodes) touch(s);
  std::vector<EdgeSpec> edges;
  edges.reserve(pairs.size() * 2);
  for (const auto& [key, dist] : pairs) {
    const double fft = dist / opts.speed_limit_mph * 60.0;
    edges.push_back({nodes[key.first], nodes[key.second], fft, opts.capacity, dist, opts.speed_limit_mph, {}});
    edges.push_back({nodes[key.second], nodes[key.first], fft, opts.capacity, dist, opts.speed_limit_mph, {}});
  }
  return build_network(nodes, edges);
}

/// Writes one row per directed edge.
inline void write_topology_csv(const RoadNetwork& net, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write " + path);
  out << "from,to,distance_miles\n";
  out.precision(17);
  for (const auto& e : net.edges()) out << net.label(e.from) << ',' << net.label(e.to) << ',' << e.distance_miles << '\n';
}

struct RegionRow {
  std::string sensor_id;
  RegionId region = 0;
  double vulnerability = 0.0;
  double weight = 1.0;
};

inline std::vector<RegionRow> read_regions_csv(const std::string& path) {
  auto rows = detail::read_csv(path, "sensor_id,region_id,vulnerability,weight");
  std::vector<RegionRow> out;
  std::size_t line_no = 1;
  for (const auto& r : rows) {
    ++line_no;
    const double region = detail::parse_double(r[1], line_no);
    require(region >= 0.0 && region == std::floor(region), ErrorCode::MalformedRow,
            "line " + std::to_string(line_no) + ": region id must be a non-negative integer");
    out.push_back({r[0], static_cast<RegionId>(region), detail::parse_double(r[2], line_no),
                   detail::parse_double(r[3], line_no)});
  }
  return out;
}

/// Partition and demographics from region rows; every network node must be listed.
inline std::pair<RegionPartition, SegmentDemographics> regions_from_rows(const RoadNetwork& net,
                                                                         const std::vector<RegionRow>& rows) {
  std::map<std::string, RegionId> mapping;
  SegmentDemographics demo{std::vector<double>(net.node_count(), 0.0), std::vector<double>(net.node_count(), 0.0)};
  std::vector<bool> covered(net.node_count(), false);
  for (const auto& r : rows) {
    mapping[r.sensor_id] = r.region;
    auto v = net.find(r.sensor_id);
    require(v.has_value(), ErrorCode::DanglingEdge, "regions file names unknown sensor '" + r.sensor_id + "'");
    demo.weight[*v] = r.weight;
    demo.vulnerability[*v] = r.vulnerability;
    covered[*v] = true;
  }
  auto partition = assign_regions(net, mapping);
  demo.validate(net);
  return {std::move(partition), std::move(demo)};
}

inline void write_regions_csv(const RoadNetwork& net, const RegionPartition& partition,
                              const SegmentDemographics& demo, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write " + path);
  out << "sensor_id,region_id,vulnerability,weight\n";
  out.precision(17);
  for (NodeIndex v = 0; v < net.node_count(); ++v)
    out << net.label(v) << ',' << partition.region_of(v) << ',' << demo.vulnerability[v] << ',' << demo.weight[v]
        << '\n';
}

}  // namespace fedfair
