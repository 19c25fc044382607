#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedfair/error.hpp"
#include "fedfair/gnn.hpp"
#include "fedfair/network.hpp"
#include "fedfair/privacy.hpp"
#include "fedfair/rng.hpp"
#include "fedfair/tensor.hpp"

namespace fedfair {

// ---------------------------------------------------------------------------
// Quantization

enum class RoundingMode { Stochastic, Deterministic };

struct QuantizedTensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  double min = 0.0;
  double max = 0.0;
  std::vector<std::uint32_t> levels;  // used when bits < 32
  std::vector<double> raw;            // used when bits == 32
};

struct QuantizedGradient {
  unsigned bits = 32;
  std::vector<QuantizedTensor> tensors;
};

inline std::uint64_t level_count(unsigned bits) { return (std::uint64_t{1} << bits) - 1; }

/// Per-tensor uniform quantization over [min, max] into 2^bits levels.
/// bits == 32 stores values verbatim.
inline QuantizedGradient quantize(const ModelGradient& grad, unsigned bits, std::uint64_t seed,
                                  RoundingMode rounding = RoundingMode::Stochastic) {
  require(bits >= 1 && bits <= 32, ErrorCode::InvalidBits, "bits must be in [1,32]");
  QuantizedGradient q;
  q.bits = bits;
  Rng rng(seed);
  for (const auto& t : grad.values.tensors()) {
    QuantizedTensor qt;
    qt.name = t.name;
    qt.rows = t.rows;
    qt.cols = t.cols;
    if (bits == 32) {
      qt.raw = t.values;
      q.tensors.push_back(std::move(qt));
      continue;
    }
    if (!t.values.empty()) {
      const auto [lo, hi] = std::minmax_element(t.values.begin(), t.values.end());
      qt.min = *lo;
      qt.max = *hi;
    }
    const std::uint64_t top = level_count(bits);
    const double step = (qt.max - qt.min) / static_cast<double>(top);
    qt.levels.reserve(t.values.size());
    for (double v : t.values) {
      if (step == 0.0) {
        qt.levels.push_back(0);
        continue;
      }
      const double pos = std::clamp((v - qt.min) / step, 0.0, static_cast<double>(top));
      double idx = std::floor(pos);
      const double frac = pos - idx;
      if (rounding == RoundingMode::Stochastic) {
        if (rng.uniform() < frac) idx += 1.0;
      } else if (frac >= 0.5) {
        idx += 1.0;
      }
      qt.levels.push_back(static_cast<std::uint32_t>(std::min(idx, static_cast<double>(top))));
    }
    q.tensors.push_back(std::move(qt));
  }
  return q;
}

inline ModelGradient dequantize(const QuantizedGradient& q) {
  require(q.bits >= 1 && q.bits <= 32, ErrorCode::CorruptPayload, "bit width out of range");
  std::vector<Tensor> tensors;
  tensors.reserve(q.tensors.size());
  for (const auto& qt : q.tensors) {
    Tensor t(qt.name, qt.rows, qt.cols);
    if (q.bits == 32) {
      require(qt.raw.size() == t.size(), ErrorCode::CorruptPayload, "payload length for " + qt.name);
      t.values = qt.raw;
    } else {
      require(qt.levels.size() == t.size(), ErrorCode::CorruptPayload, "payload length for " + qt.name);
      require(std::isfinite(qt.min) && std::isfinite(qt.max) && qt.min <= qt.max, ErrorCode::CorruptPayload,
              "range for " + qt.name);
      const std::uint64_t top = level_count(q.bits);
      const double step = (qt.max - qt.min) / static_cast<double>(top);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const std::uint64_t idx = qt.levels[i];
        require(idx <= top, ErrorCode::CorruptPayload, "level index out of range in " + qt.name);
        t.values[i] = idx == top ? qt.max : qt.min + static_cast<double>(idx) * step;
      }
    }
    tensors.push_back(std::move(t));
  }
  return ModelGradient{ParameterSet(std::move(tensors))};
}

enum class BitsRule { Schedule, Adaptive };

struct QuantizationPolicy {
  BitsRule rule = BitsRule::Adaptive;
  std::vector<unsigned> schedule{32};  // round t uses schedule[min(t, size-1)]
  RoundingMode rounding = RoundingMode::Stochastic;
  unsigned initial_bits = 16;  // adaptive rule before any update has been seen

  void validate() const {
    require(!schedule.empty(), ErrorCode::InvalidBits, "empty bit schedule");
    for (unsigned b : schedule) require(b >= 1 && b <= 32, ErrorCode::InvalidBits, "scheduled bits outside [1,32]");
    require(initial_bits >= 1 && initial_bits <= 32, ErrorCode::InvalidBits, "initial bits outside [1,32]");
  }
};

/// Share of the update energy that is spread across clients rather than
/// common to all of them: sum of per-coordinate variances over the sum of
/// per-coordinate second moments. 0 for identical updates, near 1 for noise.
inline double gradient_variance_ratio(std::span<const ModelGradient> updates) {
  if (updates.empty()) return 0.0;
  const double n = static_cast<double>(updates.size());
  double second = 0.0, var = 0.0;
  const auto& first = updates.front().values;
  for (std::size_t t = 0; t < first.tensor_count(); ++t) {
    for (std::size_t j = 0; j < first[t].size(); ++j) {
      double mean = 0.0, sq = 0.0;
      for (const auto& u : updates) {
        const double x = u.values[t].values[j];
        mean += x;
        sq += x * x;
      }
      mean /= n;
      sq /= n;
      second += sq;
      var += std::max(0.0, sq - mean * mean);
    }
  }
  return second > 0.0 ? var / second : 0.0;
}

inline unsigned adaptive_bits(double variance_ratio) {
  const double b = std::round(32.0 * variance_ratio);
  return static_cast<unsigned>(std::clamp(b, 4.0, 16.0));
}

inline unsigned bits_for_round(const QuantizationPolicy& policy, std::size_t round,
                               std::optional<double> previous_variance_ratio) {
  if (policy.rule == BitsRule::Schedule) return policy.schedule[std::min(round, policy.schedule.size() - 1)];
  return previous_variance_ratio ? adaptive_bits(*previous_variance_ratio) : policy.initial_bits;
}

// ---------------------------------------------------------------------------
// Communication accounting

inline constexpr std::uint64_t kTensorHeaderBytes = 64;

struct RoundTraffic {
  std::uint64_t uplink_payload = 0;
  std::uint64_t uplink_header = 0;
  std::uint64_t downlink = 0;

  std::uint64_t uplink() const { return uplink_payload + uplink_header; }
  std::uint64_t total() const { return uplink() + downlink; }
};

/// uplink = K (ceil(P b / 8) + 64 per tensor); downlink = K P 4.
inline RoundTraffic ledger_bytes(std::uint64_t params, unsigned bits, std::uint64_t clients,
                                 std::uint64_t tensors = 1) {
  require(params > 0, ErrorCode::RangeViolation, "model has no parameters");
  require(bits >= 1 && bits <= 32, ErrorCode::InvalidBits, "bits must be in [1,32]");
  RoundTraffic r;
  r.uplink_payload = clients * ((params * bits + 7) / 8);
  r.uplink_header = clients * tensors * kTensorHeaderBytes;
  r.downlink = clients * params * 4;
  return r;
}

/// 1 - payload(a) / payload(b), headers excluded.
inline double uplink_reduction(const RoundTraffic& compressed, const RoundTraffic& baseline) {
  require(baseline.uplink_payload > 0, ErrorCode::RangeViolation, "baseline carries no payload");
  return 1.0 - static_cast<double>(compressed.uplink_payload) / static_cast<double>(baseline.uplink_payload);
}

class CommunicationLedger {
 public:
  struct Entry {
    std::size_t round = 0;
    RoundTraffic traffic;
    std::vector<std::size_t> participants;
  };

  void record(std::size_t round, const RoundTraffic& traffic, std::vector<std::size_t> participants) {
    entries_.push_back({round, traffic, std::move(participants)});
    total_.uplink_payload += traffic.uplink_payload;
    total_.uplink_header += traffic.uplink_header;
    total_.downlink += traffic.downlink;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  const RoundTraffic& totals() const { return total_; }

  bool consistent() const {
    RoundTraffic sum;
    for (const auto& e : entries_) {
      sum.uplink_payload += e.traffic.uplink_payload;
      sum.uplink_header += e.traffic.uplink_header;
      sum.downlink += e.traffic.downlink;
    }
    return sum.uplink_payload == total_.uplink_payload && sum.uplink_header == total_.uplink_header &&
           sum.downlink == total_.downlink;
  }

 private:
  std::vector<Entry> entries_;
  RoundTraffic total_;
};

// ---------------------------------------------------------------------------
// Client selection

inline void check_k(std::size_t k, std::size_t n) {
  require(k >= 1 && k <= n, ErrorCode::InvalidK, "need 1 <= K <= " + std::to_string(n));
}

/// Greedy maximization of the summed score for fixed per-client scores;
/// ties go to the lowest id. Returned ids are ascending.
inline std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k) {
  check_k(k, scores.size());
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

struct ClientProfile {
  std::optional<double> last_update_norm;
  std::vector<double> summary;  // label-mean summary of local data
};

struct ClientScore {
  double contribution = 0.0;
  double diversity = 0.0;
};

inline double contribution_of(const ClientProfile& c) { return c.last_update_norm ? *c.last_update_norm : 1.0; }

/// Sequential greedy pick: each step takes the client maximizing
/// contribution * diversity, where diversity is the distance between its
/// summary and the mean summary of the clients picked so far (1 for the
/// first pick). Ties go to the lowest id. Returned ids are ascending.
inline std::vector<std::size_t> score_and_select(std::span<const ClientProfile> clients, std::size_t k,
                                                 std::vector<ClientScore>* scores_out = nullptr) {
  // scores_out receives, for each picked client, the score it was picked with
  check_k(k, clients.size());
  const std::size_t n = clients.size();
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> picked;
  std::vector<ClientScore> scores(n);
  std::vector<double> centroid;
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t best = n;
    double best_gain = -1.0, best_diversity = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      double diversity = 1.0;
      if (!picked.empty()) {
        double s = 0.0;
        const auto& x = clients[i].summary;
        for (std::size_t j = 0; j < centroid.size(); ++j) {
          const double d = (j < x.size() ? x[j] : 0.0) - centroid[j];
          s += d * d;
        }
        diversity = std::sqrt(s);
      }
      const double gain = contribution_of(clients[i]) * diversity;
      if (gain > best_gain) {
        best_gain = gain;
        best_diversity = diversity;
        best = i;
      }
    }
    scores[best] = {contribution_of(clients[best]), best_diversity};
    taken[best] = true;
    picked.push_back(best);
    std::size_t width = 0;
    for (std::size_t p : picked) width = std::max(width, clients[p].summary.size());
    centroid.assign(width, 0.0);
    for (std::size_t p : picked)
      for (std::size_t j = 0; j < clients[p].summary.size(); ++j) centroid[j] += clients[p].summary[j];
    for (double& c : centroid) c /= static_cast<double>(picked.size());
  }
  if (scores_out) *scores_out = std::move(scores);
  std::sort(picked.begin(), picked.end());
  return picked;
}

/// [mean, std] of the normalized speed targets a client holds.
inline std::vector<double> label_summary(std::span<const GraphSample> data, double speed_scale_mph) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& s : data)
    for (const auto& t : s.targets)
      if (t) {
        const double y = *t / speed_scale_mph;
        sum += y;
        sq += y * y;
        ++n;
      }
  if (n == 0) return {0.0, 0.0};
  const double mean = sum / static_cast<double>(n);
  return {mean, std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean))};
}

/// Copy of a sample whose targets are restricted to the edges of one region.
inline GraphSample scope_to_region(const GraphSample& sample, const RegionPartition& partition,
                                   const RoadNetwork& net, RegionId region) {
  GraphSample out = sample;
  for (const auto& e : net.edges())
    if (e.id < out.targets.size() && partition.region_of_edge(net, e.id) != region) out.targets[e.id].reset();
  return out;
}

// ---------------------------------------------------------------------------
// Rounds

struct FederatedConfig {
  std::size_t num_clients = 6;
  std::size_t rounds = 10;
  std::size_t local_epochs = 3;
  double participation = 1.0;
  double learning_rate = 0.01;
  std::size_t batch_size = 10;
  QuantizationPolicy quantization;
  PrivacyParams privacy;
  std::optional<AdaptiveClipConfig> adaptive_clip = AdaptiveClipConfig{};
  std::optional<double> epsilon_budget;  // unset: exactly enough for `rounds`
  bool parallel = true;

  std::size_t selected_per_round() const {
    const double k = std::round(participation * static_cast<double>(num_clients));
    return static_cast<std::size_t>(std::clamp(k, 1.0, static_cast<double>(num_clients)));
  }

  double budget() const {
    return epsilon_budget ? *epsilon_budget : compose_budget(privacy.epsilon, privacy.delta, rounds);
  }

  void validate() const {
    require(num_clients >= 1, ErrorCode::RangeViolation, "num_clients must be >= 1");
    require(rounds >= 1, ErrorCode::RangeViolation, "rounds must be >= 1");
    require(local_epochs >= 1, ErrorCode::RangeViolation, "local_epochs must be >= 1");
    require(participation > 0.0 && participation <= 1.0, ErrorCode::RangeViolation, "participation outside (0,1]");
    require(learning_rate > 0.0, ErrorCode::RangeViolation, "learning_rate must be > 0");
    require(batch_size >= 1, ErrorCode::RangeViolation, "batch_size must be >= 1");
    quantization.validate();
    privacy.validate();
    if (adaptive_clip) adaptive_clip->validate();
    require(!epsilon_budget || *epsilon_budget > 0.0, ErrorCode::RangeViolation, "epsilon budget must be > 0");
  }
};

struct FederatedState {
  GnnModel global;
  PrivacyAccountant accountant;
  CommunicationLedger ledger;
  std::vector<ClientProfile> clients;
  double clip_norm = 1.0;
  std::optional<double> last_variance_ratio;

  FederatedState(GnnModel model, const FederatedConfig& cfg)
      : global(std::move(model)),
        accountant(cfg.budget(), cfg.privacy.delta),
        clients(cfg.num_clients),
        clip_norm(cfg.privacy.clip_norm) {}
};

struct RoundReport {
  std::size_t round = 0;
  double mean_loss = 0.0;
  std::optional<double> travel_time_min;
  std::optional<double> gini;
  std::optional<double> jain;
  double epsilon_spent = 0.0;
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;

  std::vector<std::size_t> selected;
  unsigned bits = 32;
  double clip_norm = 0.0;
  double sigma = 0.0;
  ModelGradient applied_update;

  bool operator==(const RoundReport&) const = default;
};

inline nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json to_json(const RoundReport& r) {
  nlohmann::ordered_json j;
  j["round"] = r.round;
  j["mean_loss"] = r.mean_loss;
  j["travel_time_min"] = optional_json(r.travel_time_min);
  j["gini"] = optional_json(r.gini);
  j["jain"] = optional_json(r.jain);
  j["epsilon_spent"] = r.epsilon_spent;
  j["uplink_bytes"] = r.uplink_bytes;
  j["downlink_bytes"] = r.downlink_bytes;
  return j;
}

inline nlohmann::ordered_json privacy_json(const RoundReport& r, double delta) {
  nlohmann::ordered_json j;
  j["round"] = r.round;
  j["epsilon_spent"] = r.epsilon_spent;
  j["delta"] = delta;
  j["clip_norm"] = r.clip_norm;
  j["sigma"] = r.sigma;
  return j;
}

/// One federated round: select, broadcast, train locally, clip and noise,
/// quantize, aggregate, update. `client_data[i]` is client i's local set.
/// Throws BudgetExhausted before touching the model when the accountant
/// cannot afford the round.
inline RoundReport run_round(FederatedState& state, const RoadNetwork& net,
                             std::span<const std::vector<GraphSample>> client_data, const FederatedConfig& cfg,
                             std::size_t round_index, std::uint64_t seed) {
  cfg.validate();
  require(client_data.size() == cfg.num_clients && state.clients.size() == cfg.num_clients,
          ErrorCode::EmptyClientSet, "client data does not match num_clients");
  PrivacyParams params = cfg.privacy;
  params.clip_norm = state.clip_norm;
  if (!state.accountant.can_charge(params.epsilon)) state.accountant.charge(params.epsilon);

  std::vector<ClientProfile> profiles = state.clients;
  const double scale = state.global.config().speed_scale_mph;
  for (std::size_t i = 0; i < profiles.size(); ++i) profiles[i].summary = label_summary(client_data[i], scale);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < cfg.num_clients; ++i)
    if (!client_data[i].empty()) eligible.push_back(i);
  require(!eligible.empty(), ErrorCode::EmptyClientSet, "no client holds data");
  std::vector<ClientProfile> eligible_profiles;
  for (std::size_t i : eligible) eligible_profiles.push_back(profiles[i]);
  const std::size_t k = std::min(cfg.selected_per_round(), eligible.size());
  std::vector<std::size_t> selected;
  for (std::size_t j : score_and_select(eligible_profiles, k)) selected.push_back(eligible[j]);

  const unsigned bits = bits_for_round(cfg.quantization, round_index, state.last_variance_ratio);
  const double sigma = params.sigma();

  auto train_one = [&](std::size_t client) {
    TrainConfig tc;
    tc.epochs = cfg.local_epochs;
    tc.learning_rate = cfg.learning_rate;
    tc.batch_size = cfg.batch_size;
    tc.seed = derive_seed(seed, {round_index, client, 1});
    return local_train(state.global, net, client_data[client], tc);
  };
  std::vector<TrainResult> trained;
  trained.reserve(selected.size());
  if (cfg.parallel && selected.size() > 1) {
    std::vector<std::future<TrainResult>> jobs;
    for (std::size_t c : selected) jobs.push_back(std::async(std::launch::async, train_one, c));
    for (auto& j : jobs) trained.push_back(j.get());
  } else {
    for (std::size_t c : selected) trained.push_back(train_one(c));
  }

  std::vector<ModelGradient> received;
  std::vector<double> raw_norms;
  double loss_sum = 0.0;
  for (std::size_t j = 0; j < selected.size(); ++j) {
    const std::size_t c = selected[j];
    raw_norms.push_back(trained[j].update.l2_norm());
    loss_sum += trained[j].final_loss;
    const auto noised = privatize(trained[j].update, params, derive_seed(seed, {round_index, c, 2}));
    const auto payload = quantize(noised, bits, derive_seed(seed, {round_index, c, 3}), cfg.quantization.rounding);
    received.push_back(dequantize(payload));
  }
  ModelGradient mean = secure_mean(received);
  state.accountant.charge(params.epsilon);

  state.global.params().axpy(1.0, mean.values);
  for (std::size_t j = 0; j < selected.size(); ++j) state.clients[selected[j]].last_update_norm = raw_norms[j];
  state.last_variance_ratio = gradient_variance_ratio(received);
  const auto& gp = state.global.params();
  const auto traffic = ledger_bytes(gp.parameter_count(), bits, selected.size(), gp.tensor_count());
  state.ledger.record(round_index, traffic, selected);

  RoundReport report;
  report.round = round_index;
  report.mean_loss = loss_sum / static_cast<double>(selected.size());
  report.epsilon_spent = state.accountant.spent();
  report.uplink_bytes = traffic.uplink();
  report.downlink_bytes = traffic.downlink;
  report.selected = selected;
  report.bits = bits;
  report.clip_norm = params.clip_norm;
  report.sigma = sigma;
  report.applied_update = std::move(mean);
  if (cfg.adaptive_clip) state.clip_norm = adapt_clip_norm(state.clip_norm, raw_norms, *cfg.adaptive_clip);
  return report;
}

}  // namespace fedfair
