#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedfair/error.hpp"
#include "fedfair/network.hpp"
#include "fedfair/rng.hpp"
#include "fedfair/tensor.hpp"

namespace fedfair {

enum class Aggregator { Attention, Mean };

struct GnnConfig {
  std::size_t feature_width = 2;  // observed features x_v
  std::size_t static_width = 1;   // static node attributes e_v
  std::size_t edge_width = 1;     // edge attributes e_uv
  std::size_t hidden = 64;
  std::size_t layers = 3;
  double dropout = 0.2;
  Aggregator aggregator = Aggregator::Attention;
  double leaky_slope = 0.2;
  double layernorm_eps = 1e-5;
  double speed_scale_mph = 80.0;  // speeds are divided by this before the loss

  std::size_t input_width() const { return feature_width + static_width; }
  std::size_t layer_input_width(std::size_t l) const { return l == 0 ? input_width() : hidden; }
};

/// Message-passing network with attention aggregation, a GRU temporal cell
/// and a softplus travel-time readout. Parameters live in one ParameterSet
/// whose order is fixed by the configuration.
class GnnModel {
 public:
  struct LayerSlots {
    std::size_t msg, attention, self, neigh;
  };
  struct GruSlots {
    std::size_t wz, uz, bz, wr, ur, br, wh, uh, bh;
  };

  GnnModel() = default;

  explicit GnnModel(const GnnConfig& config) : config_(config) {
    require(config.hidden > 0 && config.layers > 0, ErrorCode::RangeViolation, "hidden width and layers must be >= 1");
    require(config.dropout >= 0.0 && config.dropout < 1.0, ErrorCode::RangeViolation, "dropout outside [0,1)");
    const std::size_t d = config.hidden;
    for (std::size_t l = 0; l < config.layers; ++l) {
      const std::size_t din = config.layer_input_width(l);
      const std::string p = "layer" + std::to_string(l) + ".";
      LayerSlots s{};
      s.msg = params_.add(p + "W_msg", d, 2 * din + config.edge_width);
      s.attention = params_.add(p + "a", 2 * din, 1);
      s.self = params_.add(p + "W_self", d, din);
      s.neigh = params_.add(p + "W_neigh", d, d);
      layers_.push_back(s);
    }
    gru_.wz = params_.add("gru.W_z", d, d);
    gru_.uz = params_.add("gru.U_z", d, d);
    gru_.bz = params_.add("gru.b_z", d, 1);
    gru_.wr = params_.add("gru.W_r", d, d);
    gru_.ur = params_.add("gru.U_r", d, d);
    gru_.br = params_.add("gru.b_r", d, 1);
    gru_.wh = params_.add("gru.W_h", d, d);
    gru_.uh = params_.add("gru.U_h", d, d);
    gru_.bh = params_.add("gru.b_h", d, 1);
    readout_w_ = params_.add("readout.w", 2 * d, 1);
    readout_b_ = params_.add("readout.b", 1, 1);
  }

  const GnnConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const LayerSlots& layer(std::size_t l) const { return layers_.at(l); }
  const GruSlots& gru() const { return gru_; }
  std::size_t readout_weight() const { return readout_w_; }
  std::size_t readout_bias() const { return readout_b_; }

  /// Matrices and attention vectors uniform in +-1/sqrt(fan_in); biases zero.
  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& t : params_.tensors()) {
      const bool bias = t.name.find(".b") != std::string::npos;
      if (bias) {
        std::fill(t.values.begin(), t.values.end(), 0.0);
        continue;
      }
      const std::size_t fan_in = t.cols == 1 ? t.rows : t.cols;
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& v : t.values) v = rng.uniform(-bound, bound);
    }
  }

 private:
  GnnConfig config_;
  ParameterSet params_;
  std::vector<LayerSlots> layers_;
  GruSlots gru_{};
  std::size_t readout_w_ = 0;
  std::size_t readout_b_ = 0;
};

inline GnnModel make_model(const GnnConfig& config, std::uint64_t seed) {
  GnnModel m(config);
  m.initialize(seed);
  return m;
}

// ---------------------------------------------------------------------------
// Building blocks

inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

/// h0 = [x ; e]
inline std::vector<double> init_embeddings(std::span<const double> observed, std::span<const double> static_attrs,
                                           std::size_t expected_width) {
  require(observed.size() + static_attrs.size() == expected_width, ErrorCode::WidthMismatch,
          "input width " + std::to_string(observed.size() + static_attrs.size()) + " != " +
              std::to_string(expected_width));
  std::vector<double> h(observed.begin(), observed.end());
  h.insert(h.end(), static_attrs.begin(), static_attrs.end());
  return h;
}

/// W_msg [h_u ; h_v ; e_uv]
inline std::vector<double> message(const Tensor& w_msg, std::span<const double> h_u, std::span<const double> h_v,
                                   std::span<const double> e_uv) {
  require(h_u.size() == h_v.size() && w_msg.cols == h_u.size() + h_v.size() + e_uv.size(), ErrorCode::WidthMismatch,
          "message input width does not match W_msg");
  std::vector<double> in(h_u.begin(), h_u.end());
  in.insert(in.end(), h_v.begin(), h_v.end());
  in.insert(in.end(), e_uv.begin(), e_uv.end());
  std::vector<double> out(w_msg.rows);
  matvec(w_msg, in, out);
  return out;
}

/// softmax over LeakyReLU(a . [h_u ; h_v]) for each neighbor u.
inline std::vector<double> attention_weights(std::span<const double> h_v,
                                             const std::vector<std::vector<double>>& neighbors,
                                             std::span<const double> a, double slope = 0.2) {
  require(!neighbors.empty(), ErrorCode::NoNeighbors, "attention needs at least one neighbor");
  require(a.size() == 2 * h_v.size(), ErrorCode::WidthMismatch, "attention vector width");
  const std::size_t din = h_v.size();
  double self_part = 0.0;
  for (std::size_t i = 0; i < din; ++i) self_part += a[din + i] * h_v[i];
  std::vector<double> scores(neighbors.size());
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    require(neighbors[k].size() == din, ErrorCode::WidthMismatch, "neighbor embedding width");
    double s = self_part;
    for (std::size_t i = 0; i < din; ++i) s += a[i] * neighbors[k][i];
    scores[k] = leaky_relu(s, slope);
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double& s : scores) z += (s = std::exp(s - mx));
  for (double& s : scores) s /= z;
  return scores;
}

inline std::vector<double> aggregate(const std::vector<std::vector<double>>& messages, std::span<const double> weights) {
  require(messages.size() == weights.size(), ErrorCode::LengthMismatch, "messages and weights differ in count");
  if (messages.empty()) return {};
  std::vector<double> out(messages.front().size(), 0.0);
  for (std::size_t k = 0; k < messages.size(); ++k) {
    require(messages[k].size() == out.size(), ErrorCode::WidthMismatch, "message widths differ");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[k] * messages[k][i];
  }
  return out;
}

/// In-place LayerNorm without affine terms; returns 1/sqrt(var + eps).
inline double layer_norm(std::span<double> x, double eps) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + eps);
  for (double& v : x) v = (v - mean) * inv;
  return inv;
}

/// LayerNorm(ReLU(W_self h + W_neigh m))
inline std::vector<double> update_node(const Tensor& w_self, const Tensor& w_neigh, std::span<const double> h_v,
                                       std::span<const double> m_v, double eps = 1e-5) {
  require(w_self.cols == h_v.size() && w_neigh.cols == m_v.size() && w_self.rows == w_neigh.rows,
          ErrorCode::WidthMismatch, "update widths");
  std::vector<double> p(w_self.rows, 0.0);
  matvec(w_self, h_v, p);
  matvec_add(w_neigh, m_v, p);
  for (double& v : p) v = std::max(v, 0.0);
  layer_norm(p, eps);
  return p;
}

struct GruGates {
  std::vector<double> z, r, candidate, h_new;
};

/// Standard GRU cell: input x (the GNN output) and previous hidden state.
inline GruGates gru_gates(const GnnModel& model, std::span<const double> h_prev, std::span<const double> x) {
  const auto& P = model.params();
  const auto& g = model.gru();
  const std::size_t d = model.config().hidden;
  require(h_prev.size() == d && x.size() == d, ErrorCode::WidthMismatch, "GRU inputs must have hidden width");
  GruGates out;
  out.z.assign(P[g.bz].values.begin(), P[g.bz].values.end());
  out.r.assign(P[g.br].values.begin(), P[g.br].values.end());
  out.candidate.assign(P[g.bh].values.begin(), P[g.bh].values.end());
  matvec_add(P[g.wz], x, out.z);
  matvec_add(P[g.uz], h_prev, out.z);
  matvec_add(P[g.wr], x, out.r);
  matvec_add(P[g.ur], h_prev, out.r);
  for (auto& v : out.z) v = sigmoid(v);
  for (auto& v : out.r) v = sigmoid(v);
  std::vector<double> rh(d);
  for (std::size_t i = 0; i < d; ++i) rh[i] = out.r[i] * h_prev[i];
  matvec_add(P[g.wh], x, out.candidate);
  matvec_add(P[g.uh], rh, out.candidate);
  for (auto& v : out.candidate) v = std::tanh(v);
  out.h_new.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.h_new[i] = (1.0 - out.z[i]) * h_prev[i] + out.z[i] * out.candidate[i];
  return out;
}

inline std::vector<double> gru_step(const GnnModel& model, std::span<const double> h_prev, std::span<const double> x) {
  return gru_gates(model, h_prev, x).h_new;
}

// ---------------------------------------------------------------------------
// Whole-graph forward and reverse pass

/// One observation of the graph: per-node observed features, the recurrent
/// state going in, and optional per-edge target speeds (mph). Edges without
/// a target do not enter the loss.
struct GraphSample {
  std::vector<std::vector<double>> features;   // node -> x_v
  std::vector<std::vector<double>> h_prev;     // node -> h_v(t-1); empty means zeros
  std::vector<std::optional<double>> targets;  // edge -> observed speed
};

struct ForwardMode {
  bool training = false;
  std::uint64_t dropout_seed = 0;
};

struct ForwardResult {
  std::vector<double> edge_time;               // predicted minutes per edge
  std::vector<std::vector<double>> embeddings;  // new recurrent state per node
};

namespace detail {

struct LayerCache {
  std::vector<double> h;           // n x din, layer input
  std::vector<double> scores;      // per in-edge slot, raw attention score
  std::vector<double> alpha;       // per in-edge slot
  std::vector<double> messages;    // per in-edge slot x d
  std::vector<double> m;           // n x d
  std::vector<double> pre;         // n x d, before ReLU
  std::vector<double> normed;      // n x d, LayerNorm output
  std::vector<double> inv_sigma;   // n
  std::vector<double> mask;        // n x d, dropout scale (empty when off)
};

struct ForwardCache {
  std::vector<std::size_t> slot_offset;  // node -> first in-edge slot
  std::vector<LayerCache> layers;
  std::vector<double> gnn_out;  // n x d
  std::vector<double> h_prev;   // n x d
  std::vector<double> z, r, candidate, h_new;
  std::vector<double> readout_pre;  // per edge
  std::vector<double> edge_time;
};

inline void check_sample(const GnnModel& model, const RoadNetwork& net, const GraphSample& sample) {
  const auto& c = model.config();
  require(sample.features.size() == net.node_count(), ErrorCode::MissingState, "features must cover every node");
  require(net.node_attr_width() == c.static_width, ErrorCode::WidthMismatch, "static attribute width");
  require(net.edge_count() == 0 || net.edge_attr_width() == c.edge_width, ErrorCode::WidthMismatch,
          "edge attribute width");
  for (const auto& x : sample.features)
    require(x.size() == c.feature_width, ErrorCode::WidthMismatch, "observed feature width");
  require(sample.h_prev.empty() || sample.h_prev.size() == net.node_count(), ErrorCode::MissingState,
          "recurrent state must cover every node");
  for (const auto& h : sample.h_prev) require(h.size() == c.hidden, ErrorCode::WidthMismatch, "recurrent state width");
  require(sample.targets.empty() || sample.targets.size() == net.edge_count(), ErrorCode::MissingState,
          "targets must cover every edge");
}

inline ForwardCache forward_cached(const GnnModel& model, const RoadNetwork& net, const GraphSample& sample,
                                   const ForwardMode& mode) {
  check_sample(model, net, sample);
  const auto& c = model.config();
  const auto& P = model.params();
  const std::size_t n = net.node_count();
  const std::size_t d = c.hidden;

  ForwardCache cache;
  cache.slot_offset.resize(n + 1, 0);
  for (NodeIndex v = 0; v < n; ++v) cache.slot_offset[v + 1] = cache.slot_offset[v] + net.in_edges(v).size();
  const std::size_t slots = cache.slot_offset[n];

  std::vector<double> h(n * c.input_width());
  for (NodeIndex v = 0; v < n; ++v) {
    auto h0 = init_embeddings(sample.features[v], net.node_attrs(v), c.input_width());
    std::copy(h0.begin(), h0.end(), h.begin() + static_cast<std::ptrdiff_t>(v * c.input_width()));
  }

  Rng dropout_rng(mode.dropout_seed);
  const bool use_dropout = mode.training && c.dropout > 0.0;
  const double keep_scale = 1.0 / (1.0 - c.dropout);

  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::size_t din = c.layer_input_width(l);
    const auto& slotsl = model.layer(l);
    const Tensor& w_msg = P[slotsl.msg];
    const Tensor& a = P[slotsl.attention];
    LayerCache lc;
    lc.h = std::move(h);
    lc.scores.assign(slots, 0.0);
    lc.alpha.assign(slots, 0.0);
    lc.messages.assign(slots * d, 0.0);
    lc.m.assign(n * d, 0.0);
    lc.pre.assign(n * d, 0.0);
    lc.normed.assign(n * d, 0.0);
    lc.inv_sigma.assign(n, 0.0);

    std::vector<double> concat(2 * din + c.edge_width);
    for (NodeIndex v = 0; v < n; ++v) {
      const auto& in = net.in_edges(v);
      const std::span<const double> hv(lc.h.data() + v * din, din);
      const std::size_t base = cache.slot_offset[v];
      if (!in.empty()) {
        for (std::size_t k = 0; k < in.size(); ++k) {
          const auto& e = net.edge(in[k]);
          const std::span<const double> hu(lc.h.data() + e.from * din, din);
          std::copy(hu.begin(), hu.end(), concat.begin());
          std::copy(hv.begin(), hv.end(), concat.begin() + static_cast<std::ptrdiff_t>(din));
          std::copy(e.attrs.begin(), e.attrs.end(), concat.begin() + static_cast<std::ptrdiff_t>(2 * din));
          matvec(w_msg, concat, std::span<double>(lc.messages.data() + (base + k) * d, d));
          double s = 0.0;
          for (std::size_t i = 0; i < 2 * din; ++i) s += a.values[i] * concat[i];
          lc.scores[base + k] = s;
        }
        if (c.aggregator == Aggregator::Attention) {
          double mx = -std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < in.size(); ++k)
            mx = std::max(mx, leaky_relu(lc.scores[base + k], c.leaky_slope));
          double zsum = 0.0;
          for (std::size_t k = 0; k < in.size(); ++k)
            zsum += (lc.alpha[base + k] = std::exp(leaky_relu(lc.scores[base + k], c.leaky_slope) - mx));
          for (std::size_t k = 0; k < in.size(); ++k) lc.alpha[base + k] /= zsum;
        } else {
          for (std::size_t k = 0; k < in.size(); ++k) lc.alpha[base + k] = 1.0 / static_cast<double>(in.size());
        }
        double* mv = lc.m.data() + v * d;
        for (std::size_t k = 0; k < in.size(); ++k) {
          const double* msg = lc.messages.data() + (base + k) * d;
          for (std::size_t i = 0; i < d; ++i) mv[i] += lc.alpha[base + k] * msg[i];
        }
      }
      std::span<double> pre(lc.pre.data() + v * d, d);
      matvec(P[slotsl.self], hv, pre);
      matvec_add(P[slotsl.neigh], std::span<const double>(lc.m.data() + v * d, d), pre);
      std::span<double> out(lc.normed.data() + v * d, d);
      for (std::size_t i = 0; i < d; ++i) out[i] = std::max(pre[i], 0.0);
      lc.inv_sigma[v] = layer_norm(out, c.layernorm_eps);
    }

    h.assign(lc.normed.begin(), lc.normed.end());
    if (use_dropout) {
      lc.mask.resize(n * d);
      for (std::size_t i = 0; i < n * d; ++i) {
        lc.mask[i] = dropout_rng.uniform() < c.dropout ? 0.0 : keep_scale;
        h[i] *= lc.mask[i];
      }
    }
    cache.layers.push_back(std::move(lc));
  }

  cache.gnn_out = std::move(h);
  cache.h_prev.assign(n * d, 0.0);
  for (NodeIndex v = 0; v < sample.h_prev.size(); ++v)
    std::copy(sample.h_prev[v].begin(), sample.h_prev[v].end(), cache.h_prev.begin() + static_cast<std::ptrdiff_t>(v * d));
  cache.z.resize(n * d);
  cache.r.resize(n * d);
  cache.candidate.resize(n * d);
  cache.h_new.resize(n * d);
  for (NodeIndex v = 0; v < n; ++v) {
    auto gates = gru_gates(model, std::span<const double>(cache.h_prev.data() + v * d, d),
                           std::span<const double>(cache.gnn_out.data() + v * d, d));
    std::copy(gates.z.begin(), gates.z.end(), cache.z.begin() + static_cast<std::ptrdiff_t>(v * d));
    std::copy(gates.r.begin(), gates.r.end(), cache.r.begin() + static_cast<std::ptrdiff_t>(v * d));
    std::copy(gates.candidate.begin(), gates.candidate.end(), cache.candidate.begin() + static_cast<std::ptrdiff_t>(v * d));
    std::copy(gates.h_new.begin(), gates.h_new.end(), cache.h_new.begin() + static_cast<std::ptrdiff_t>(v * d));
  }

  const Tensor& w_out = P[model.readout_weight()];
  const double b_out = P[model.readout_bias()].values[0];
  cache.readout_pre.resize(net.edge_count());
  cache.edge_time.resize(net.edge_count());
  for (const auto& e : net.edges()) {
    double zsum = b_out;
    for (std::size_t i = 0; i < d; ++i) zsum += w_out.values[i] * cache.h_new[e.from * d + i];
    for (std::size_t i = 0; i < d; ++i) zsum += w_out.values[d + i] * cache.h_new[e.to * d + i];
    cache.readout_pre[e.id] = zsum;
    cache.edge_time[e.id] = std::max(e.free_flow_time, e.free_flow_time * (1.0 + softplus(zsum)));
  }
  return cache;
}

/// Reverse pass for a loss whose derivative w.r.t. each edge time is given.
inline void backward(const GnnModel& model, const RoadNetwork& net, const ForwardCache& cache,
                     std::span<const double> d_edge_time, ParameterSet& grad) {
  const auto& c = model.config();
  const auto& P = model.params();
  const std::size_t n = net.node_count();
  const std::size_t d = c.hidden;

  // Readout.
  std::vector<double> d_hnew(n * d, 0.0);
  const Tensor& w_out = P[model.readout_weight()];
  Tensor& g_wout = grad[model.readout_weight()];
  double& g_bout = grad[model.readout_bias()].values[0];
  for (const auto& e : net.edges()) {
    const double dt = d_edge_time[e.id];
    if (dt == 0.0) continue;
    const double dz = dt * e.free_flow_time * sigmoid(cache.readout_pre[e.id]);
    g_bout += dz;
    for (std::size_t i = 0; i < d; ++i) {
      g_wout.values[i] += dz * cache.h_new[e.from * d + i];
      g_wout.values[d + i] += dz * cache.h_new[e.to * d + i];
      d_hnew[e.from * d + i] += dz * w_out.values[i];
      d_hnew[e.to * d + i] += dz * w_out.values[d + i];
    }
  }

  // GRU.
  const auto& g = model.gru();
  std::vector<double> d_x(n * d, 0.0);
  std::vector<double> daz(d), dar(d), dac(d), drh(d), rh(d);
  for (NodeIndex v = 0; v < n; ++v) {
    const double* dh = d_hnew.data() + v * d;
    const double* z = cache.z.data() + v * d;
    const double* r = cache.r.data() + v * d;
    const double* cand = cache.candidate.data() + v * d;
    const std::span<const double> hp(cache.h_prev.data() + v * d, d);
    const std::span<const double> x(cache.gnn_out.data() + v * d, d);
    for (std::size_t i = 0; i < d; ++i) {
      dac[i] = dh[i] * z[i] * (1.0 - cand[i] * cand[i]);
      daz[i] = dh[i] * (cand[i] - hp[i]) * z[i] * (1.0 - z[i]);
      rh[i] = r[i] * hp[i];
    }
    outer_add(grad[g.wh], dac, x);
    outer_add(grad[g.uh], dac, rh);
    for (std::size_t i = 0; i < d; ++i) grad[g.bh].values[i] += dac[i];
    std::fill(drh.begin(), drh.end(), 0.0);
    matvec_transposed_add(P[g.uh], dac, drh);
    for (std::size_t i = 0; i < d; ++i) dar[i] = drh[i] * hp[i] * r[i] * (1.0 - r[i]);
    outer_add(grad[g.wr], dar, x);
    outer_add(grad[g.ur], dar, hp);
    for (std::size_t i = 0; i < d; ++i) grad[g.br].values[i] += dar[i];
    outer_add(grad[g.wz], daz, x);
    outer_add(grad[g.uz], daz, hp);
    for (std::size_t i = 0; i < d; ++i) grad[g.bz].values[i] += daz[i];
    std::span<double> dx(d_x.data() + v * d, d);
    matvec_transposed_add(P[g.wh], dac, dx);
    matvec_transposed_add(P[g.wr], dar, dx);
    matvec_transposed_add(P[g.wz], daz, dx);
  }

  // Message-passing layers, last to first.
  std::vector<double> d_h = std::move(d_x);
  for (std::size_t li = c.layers; li-- > 0;) {
    const auto& lc = cache.layers[li];
    const auto& slots = model.layer(li);
    const std::size_t din = c.layer_input_width(li);
    const Tensor& w_msg = P[slots.msg];
    const Tensor& a = P[slots.attention];
    std::vector<double> d_in(n * din, 0.0);
    std::vector<double> d_pre(d), d_m(d), d_concat(2 * din + c.edge_width), concat(2 * din + c.edge_width);
    std::vector<double> d_alpha;
    for (NodeIndex v = 0; v < n; ++v) {
      // Dropout and LayerNorm.
      std::vector<double> dn(d);
      for (std::size_t i = 0; i < d; ++i) dn[i] = d_h[v * d + i] * (lc.mask.empty() ? 1.0 : lc.mask[v * d + i]);
      const double* y = lc.normed.data() + v * d;
      double mean_dn = 0.0, mean_dny = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        mean_dn += dn[i];
        mean_dny += dn[i] * y[i];
      }
      mean_dn /= static_cast<double>(d);
      mean_dny /= static_cast<double>(d);
      for (std::size_t i = 0; i < d; ++i) {
        const double dr = lc.inv_sigma[v] * (dn[i] - mean_dn - y[i] * mean_dny);
        d_pre[i] = lc.pre[v * d + i] > 0.0 ? dr : 0.0;
      }
      const std::span<const double> hv(lc.h.data() + v * din, din);
      outer_add(grad[slots.self], d_pre, hv);
      matvec_transposed_add(P[slots.self], d_pre, std::span<double>(d_in.data() + v * din, din));
      outer_add(grad[slots.neigh], d_pre, std::span<const double>(lc.m.data() + v * d, d));
      std::fill(d_m.begin(), d_m.end(), 0.0);
      matvec_transposed_add(P[slots.neigh], d_pre, d_m);

      const auto& in = net.in_edges(v);
      if (in.empty()) continue;
      const std::size_t base = cache.slot_offset[v];
      d_alpha.assign(in.size(), 0.0);
      for (std::size_t k = 0; k < in.size(); ++k) {
        const auto& e = net.edge(in[k]);
        const double alpha = lc.alpha[base + k];
        const double* msg = lc.messages.data() + (base + k) * d;
        std::vector<double> d_msg(d);
        for (std::size_t i = 0; i < d; ++i) {
          d_alpha[k] += d_m[i] * msg[i];
          d_msg[i] = alpha * d_m[i];
        }
        const std::span<const double> hu(lc.h.data() + e.from * din, din);
        std::copy(hu.begin(), hu.end(), concat.begin());
        std::copy(hv.begin(), hv.end(), concat.begin() + static_cast<std::ptrdiff_t>(din));
        std::copy(e.attrs.begin(), e.attrs.end(), concat.begin() + static_cast<std::ptrdiff_t>(2 * din));
        outer_add(grad[slots.msg], d_msg, concat);
        std::fill(d_concat.begin(), d_concat.end(), 0.0);
        matvec_transposed_add(w_msg, d_msg, d_concat);
        for (std::size_t i = 0; i < din; ++i) {
          d_in[e.from * din + i] += d_concat[i];
          d_in[v * din + i] += d_concat[din + i];
        }
      }
      if (c.aggregator != Aggregator::Attention) continue;
      double weighted = 0.0;
      for (std::size_t k = 0; k < in.size(); ++k) weighted += lc.alpha[base + k] * d_alpha[k];
      Tensor& g_a = grad[slots.attention];
      for (std::size_t k = 0; k < in.size(); ++k) {
        const auto& e = net.edge(in[k]);
        const double d_lr = lc.alpha[base + k] * (d_alpha[k] - weighted);
        const double ds = d_lr * (lc.scores[base + k] > 0.0 ? 1.0 : c.leaky_slope);
        if (ds == 0.0) continue;
        for (std::size_t i = 0; i < din; ++i) {
          g_a.values[i] += ds * lc.h[e.from * din + i];
          g_a.values[din + i] += ds * hv[i];
          d_in[e.from * din + i] += ds * a.values[i];
          d_in[v * din + i] += ds * a.values[din + i];
        }
      }
    }
    d_h = std::move(d_in);
  }
}

}  // namespace detail

/// Predicts per-edge travel times and the next recurrent state. Predictions
/// never fall below free-flow time.
inline ForwardResult forward(const GnnModel& model, const RoadNetwork& net, const GraphSample& sample,
                             const ForwardMode& mode = {}) {
  auto cache = detail::forward_cached(model, net, sample, mode);
  ForwardResult out;
  out.edge_time = std::move(cache.edge_time);
  const std::size_t d = model.config().hidden;
  out.embeddings.resize(net.node_count());
  for (NodeIndex v = 0; v < net.node_count(); ++v)
    out.embeddings[v].assign(cache.h_new.begin() + static_cast<std::ptrdiff_t>(v * d),
                             cache.h_new.begin() + static_cast<std::ptrdiff_t>((v + 1) * d));
  return out;
}

/// Normalized speed implied by a travel time on an edge.
inline double normalized_speed(const Edge& e, double travel_time, double speed_scale_mph) {
  return e.speed_limit_mph * e.free_flow_time / travel_time / speed_scale_mph;
}

struct LossAndGradient {
  double loss = 0.0;
  ModelGradient gradient;
  std::size_t terms = 0;
};

/// Mean squared error between predicted and observed normalized speeds over
/// every (sample, edge) pair that carries a target, with its exact gradient.
inline LossAndGradient loss_and_gradient(const GnnModel& model, const RoadNetwork& net,
                                         std::span<const GraphSample> batch, const ForwardMode& mode = {},
                                         bool with_gradient = true) {
  require(!batch.empty(), ErrorCode::EmptyBatch, "loss needs at least one sample");
  std::size_t terms = 0;
  for (const auto& s : batch)
    for (const auto& t : s.targets) terms += t.has_value() ? 1 : 0;
  require(terms > 0, ErrorCode::EmptyBatch, "batch carries no targets");

  const double scale = model.config().speed_scale_mph;
  LossAndGradient out;
  out.terms = terms;
  out.gradient.values = model.params().zeros_like();
  std::vector<double> d_time(net.edge_count());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    ForwardMode m = mode;
    m.dropout_seed = derive_seed(mode.dropout_seed, {b});
    auto cache = detail::forward_cached(model, net, batch[b], m);
    std::fill(d_time.begin(), d_time.end(), 0.0);
    bool any = false;
    for (const auto& e : net.edges()) {
      if (batch[b].targets.empty() || !batch[b].targets[e.id]) continue;
      const double w = cache.edge_time[e.id];
      const double pred = normalized_speed(e, w, scale);
      const double resid = pred - *batch[b].targets[e.id] / scale;
      out.loss += resid * resid;
      // d pred / d w = -pred / w
      d_time[e.id] = 2.0 * resid / static_cast<double>(terms) * (-pred / w);
      any = true;
    }
    if (with_gradient && any) detail::backward(model, net, cache, d_time, out.gradient.values);
  }
  out.loss /= static_cast<double>(terms);
  return out;
}

inline double dataset_loss(const GnnModel& model, const RoadNetwork& net, std::span<const GraphSample> data) {
  return loss_and_gradient(model, net, data, {}, false).loss;
}

struct TrainConfig {
  std::size_t epochs = 3;
  double learning_rate = 0.01;
  std::size_t batch_size = 10;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct TrainResult {
  ModelGradient update;  // parameters after minus parameters before
  double final_loss = 0.0;
  GnnModel model;
};

/// Mini-batch SGD on one client's data. Dropout masks are seeded per
/// (epoch, batch) under the caller's seed.
inline TrainResult local_train(const GnnModel& start, const RoadNetwork& net, std::span<const GraphSample> data,
                               const TrainConfig& cfg) {
  require(!data.empty(), ErrorCode::EmptyDataset, "client holds no samples");
  require(cfg.epochs >= 1 && cfg.batch_size >= 1 && cfg.learning_rate > 0.0, ErrorCode::RangeViolation,
          "training configuration");
  GnnModel model = start;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(cfg.seed, {0x5u}));
  double final_loss = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle)
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start_idx = 0, b = 0; start_idx < order.size(); start_idx += cfg.batch_size, ++b) {
      std::vector<GraphSample> batch;
      for (std::size_t i = start_idx; i < std::min(order.size(), start_idx + cfg.batch_size); ++i)
        batch.push_back(data[order[i]]);
      bool has_target = false;
      for (const auto& s : batch)
        for (const auto& t : s.targets) has_target = has_target || t.has_value();
      if (!has_target) continue;
      ForwardMode mode{true, derive_seed(cfg.seed, {epoch, b})};
      auto lg = loss_and_gradient(model, net, batch, mode);
      model.params().axpy(-cfg.learning_rate, lg.gradient.values);
      loss_sum += lg.loss;
      ++batches;
    }
    require(batches > 0, ErrorCode::EmptyDataset, "client data carries no targets");
    final_loss = loss_sum / static_cast<double>(batches);
  }
  TrainResult out;
  out.update = difference(model.params(), start.params());
  out.final_loss = final_loss;
  out.model = std::move(model);
  return out;
}

}  // namespace fedfair
