#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedfair/error.hpp"
#include "fedfair/rng.hpp"
#include "fedfair/tensor.hpp"

namespace fedfair {

/// Gaussian-mechanism noise multiplier sqrt(2 ln(1.25/delta)) * C / epsilon.
inline double calibrate_noise(double epsilon, double delta, double clip_norm) {
  require(epsilon > 0.0 && delta > 0.0 && delta < 1.0 && clip_norm >= 0.0, ErrorCode::InvalidPrivacyParams,
          "need epsilon > 0, delta in (0,1), C >= 0");
  return std::sqrt(2.0 * std::log(1.25 / delta)) * clip_norm / epsilon;
}

struct PrivacyParams {
  double epsilon = 1.0;
  double delta = 1e-5;
  double clip_norm = 1.0;
  // Unset means derive from (epsilon, delta, clip_norm).
  std::optional<double> noise_multiplier;

  double sigma() const {
    return noise_multiplier ? *noise_multiplier : calibrate_noise(epsilon, delta, clip_norm);
  }

  void validate() const {
    require(epsilon > 0.0 && delta > 0.0 && delta < 1.0 && clip_norm > 0.0, ErrorCode::InvalidPrivacyParams,
            "need epsilon > 0, delta in (0,1), C > 0");
    require(!noise_multiplier || *noise_multiplier >= 0.0, ErrorCode::InvalidPrivacyParams, "sigma must be >= 0");
  }

  /// The Gaussian mechanism bound is only proven for epsilon < 1; larger
  /// values are accepted but flagged.
  std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    if (epsilon >= 1.0)
      w.push_back("epsilon >= 1: Gaussian mechanism calibration is used outside its proven range");
    return w;
  }
};

/// grad / max(1, ||grad|| / C)
inline ModelGradient clip_gradient(const ModelGradient& grad, double clip_norm) {
  require(clip_norm > 0.0, ErrorCode::InvalidPrivacyParams, "clip norm must be positive");
  const double norm = grad.l2_norm();
  const double factor = std::max(1.0, norm / clip_norm);
  ModelGradient out = grad;
  if (factor > 1.0) out.values.for_each_value([&](double& v) { v /= factor; });
  return out;
}

/// Adds i.i.d. N(0, (sigma C)^2) to every coordinate of an already clipped gradient.
inline ModelGradient add_noise(const ModelGradient& clipped, double sigma, double clip_norm, std::uint64_t seed) {
  require(sigma >= 0.0, ErrorCode::InvalidPrivacyParams, "sigma must be >= 0");
  require(clipped.l2_norm() <= clip_norm + 1e-9, ErrorCode::NotClipped, "gradient norm exceeds the clip norm");
  ModelGradient out = clipped;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  const double stddev = sigma * clip_norm;
  out.values.for_each_value([&](double& v) { v += stddev * rng.normal(); });
  return out;
}

/// Composed epsilon after T rounds at per-round epsilon:
/// sqrt(2 T ln(1/delta)) eps + T eps (e^eps - 1).
inline double compose_budget(double epsilon, double delta, std::size_t rounds) {
  require(epsilon > 0.0 && delta > 0.0 && delta < 1.0, ErrorCode::InvalidPrivacyParams,
          "need epsilon > 0 and delta in (0,1)");
  const double t = static_cast<double>(rounds);
  return std::sqrt(2.0 * t * std::log(1.0 / delta)) * epsilon + t * epsilon * std::expm1(epsilon);
}

/// Tracks composed privacy loss across federated rounds. Charges are totally
/// ordered; a charge that would exceed the budget freezes the account and
/// leaves every counter untouched.
class PrivacyAccountant {
 public:
  PrivacyAccountant(double budget_epsilon, double delta) : budget_(budget_epsilon), delta_(delta) {
    require(budget_epsilon > 0.0 && delta > 0.0 && delta < 1.0, ErrorCode::InvalidPrivacyParams,
            "accountant budget must be positive and delta in (0,1)");
  }

  double budget() const { return budget_; }
  double delta() const { return delta_; }
  std::size_t rounds() const { return per_round_.size(); }
  double spent() const { return spent_; }
  bool frozen() const { return frozen_; }
  const std::vector<double>& per_round_epsilon() const { return per_round_; }

  /// Composed epsilon if one more round at `round_epsilon` were charged.
  /// Rounds with different epsilons compose at the largest one.
  double projected(double round_epsilon) const {
    double eps = round_epsilon;
    for (double e : per_round_) eps = std::max(eps, e);
    return compose_budget(eps, delta_, per_round_.size() + 1);
  }

  bool can_charge(double round_epsilon) const { return !frozen_ && projected(round_epsilon) <= budget_; }

  void charge(double round_epsilon) {
    require(!frozen_, ErrorCode::BudgetExhausted, "accountant is frozen");
    const double next = projected(round_epsilon);
    if (next > budget_) {
      frozen_ = true;
      fail(ErrorCode::BudgetExhausted, "charge would spend " + std::to_string(next) + " of budget " +
                                           std::to_string(budget_));
    }
    per_round_.push_back(round_epsilon);
    spent_ = next;
  }

  /// Recomputes the composed value from the charge history.
  double recomputed_spent() const {
    if (per_round_.empty()) return 0.0;
    const double eps = *std::max_element(per_round_.begin(), per_round_.end());
    return compose_budget(eps, delta_, per_round_.size());
  }

 private:
  double budget_;
  double delta_;
  std::vector<double> per_round_;
  double spent_ = 0.0;
  bool frozen_ = false;
};

/// Client-side half of private aggregation: clip, then add calibrated noise.
inline ModelGradient privatize(const ModelGradient& grad, const PrivacyParams& params, std::uint64_t seed) {
  auto clipped = clip_gradient(grad, params.clip_norm);
  return add_noise(clipped, params.sigma(), params.clip_norm, seed);
}

/// Uniform mean of already privatized client gradients (stand-in for secure aggregation).
inline ModelGradient secure_mean(std::span<const ModelGradient> noised) {
  require(!noised.empty(), ErrorCode::EmptyClientSet, "no client gradients");
  ModelGradient out{noised.front().values.zeros_like()};
  for (const auto& g : noised) out.values.axpy(1.0, g.values);
  const double n = static_cast<double>(noised.size());
  out.values.for_each_value([n](double& v) { v /= n; });
  return out;
}

/// Clip and noise each client gradient, average them, and charge the
/// accountant once. Client i draws noise from derive_seed(seed, {i}).
inline ModelGradient aggregate_private(std::span<const ModelGradient> grads, const PrivacyParams& params,
                                       PrivacyAccountant& acct, std::uint64_t seed) {
  require(!grads.empty(), ErrorCode::EmptyClientSet, "no client gradients");
  params.validate();
  if (!acct.can_charge(params.epsilon)) acct.charge(params.epsilon);  // throws and freezes
  std::vector<ModelGradient> noised;
  noised.reserve(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) noised.push_back(privatize(grads[i], params, derive_seed(seed, {i})));
  auto out = secure_mean(noised);
  acct.charge(params.epsilon);
  return out;
}

struct AdaptiveClipConfig {
  double alpha = 0.9;
  double quantile = 0.5;

  void validate() const {
    require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::RangeViolation, "alpha outside [0,1]");
    require(quantile >= 0.5 && quantile <= 0.9, ErrorCode::RangeViolation, "quantile outside [0.5,0.9]");
  }
};

/// Lower order statistic at index ceil(q n) - 1.
inline double lower_quantile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorCode::EmptyNorms, "quantile of an empty list");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  std::size_t idx = static_cast<std::size_t>(std::ceil(q * n));
  idx = idx == 0 ? 0 : idx - 1;
  return values[std::min(idx, values.size() - 1)];
}

/// C_{t+1} = alpha C_t + (1 - alpha) quantile(norms, q)
inline double adapt_clip_norm(double clip_norm, std::span<const double> norms, const AdaptiveClipConfig& cfg) {
  require(!norms.empty(), ErrorCode::EmptyNorms, "no gradient norms for this round");
  cfg.validate();
  const double q = lower_quantile(std::vector<double>(norms.begin(), norms.end()), cfg.quantile);
  return cfg.alpha * clip_norm + (1.0 - cfg.alpha) * q;
}

}  // namespace fedfair
