#include "culcap/reward.hpp"

#include <algorithm>
#include <cmath>

namespace culcap {

double rank_to_reward(std::size_t rank_j, std::size_t rank_ref, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kRangeError, "K must be positive");
  if (rank_j < 1 || rank_j > k + 1 || rank_ref < 1 || rank_ref > k + 1) {
    throw Error(ErrorCode::kRangeError, "rank outside 1.." + std::to_string(k + 1));
  }
  return (static_cast<double>(rank_ref) - static_cast<double>(rank_j)) /
         static_cast<double>(k);
}

AdvantageVector group_advantages(std::span<const double> rewards, double epsilon) {
  if (rewards.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "an advantage group needs at least 2 rewards");
  }
  AdvantageVector out;
  out.values.assign(rewards.size(), 0.0);
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) {
    out.degenerate = true;
    return out;
  }
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out.values[i] = (rewards[i] - mean) / (sd + epsilon);
  }
  return out;
}

double PenaltyConfig::weight_of(const std::string& direction_id) const {
  auto it = direction_weights.find(direction_id);
  return it == direction_weights.end() ? 1.0 : it->second;
}

void PenaltyConfig::validate() const {
  if (!(m >= -1.0 && m <= 1.0)) throw Error(ErrorCode::kConfig, "penalty m must be in [-1, 1]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kConfig, "penalty lambda must be finite and >= 0");
  }
  for (const auto& [id, w] : direction_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kConfig, "direction weight for " + id + " must be finite and >= 0");
    }
  }
}

PrototypeMap build_prototypes(std::span<const DegradationAnnotation> annotations,
                              TextEncoder& encoder) {
  std::map<std::string, std::pair<Embedding, std::size_t>> sums;
  for (const auto& a : annotations) {
    for (const auto& text : a.evidence_texts) {
      Embedding e = encoder.embed(text);
      auto& [sum, count] = sums[a.direction_id];
      if (sum.empty()) sum.assign(e.size(), 0.0);
      for (std::size_t i = 0; i < e.size(); ++i) sum[i] += e[i];
      ++count;
    }
  }
  PrototypeMap out;
  for (auto& [id, entry] : sums) {
    auto& [sum, count] = entry;
    for (double& x : sum) x /= static_cast<double>(count);
    const double n = l2_norm(sum);
    if (n < 1e-8) {
      throw DegeneratePrototype("direction " + id + " has a zero mean evidence embedding");
    }
    for (double& x : sum) x /= n;
    out[id] = DegradationPrototype{id, std::move(sum), count};
  }
  return out;
}

double degradation_penalty(const Embedding& g, const PrototypeMap& prototypes,
                           std::span<const std::pair<std::string, double>> active,
                           const PenaltyConfig& config) {
  double total = 0.0;
  for (const auto& [id, w] : active) {
    auto it = prototypes.find(id);
    if (it == prototypes.end()) {
      throw Error(ErrorCode::kMissingDirection, "no prototype for direction " + id);
    }
    const double c = cosine(g, it->second.vector);
    total += w * config.weight_of(id) * std::max(0.0, c - config.m);
  }
  return total;
}

std::vector<std::pair<std::string, double>> active_directions(
    std::span<const DegradationAnnotation* const> annotations) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto* a : annotations) out.emplace_back(a->direction_id, a->weight);
  return out;
}

std::vector<double> rollout_penalties(std::span<const TokenSeq> rollouts,
                                      std::span<const DegradationAnnotation* const> annotations,
                                      const PrototypeMap& prototypes,
                                      const PenaltyConfig& config, TextEncoder& encoder) {
  std::vector<double> out(rollouts.size(), 0.0);
  if (annotations.empty()) return out;
  const auto active = active_directions(annotations);
  const Embedding zero(encoder.dim(), 0.0);
  for (std::size_t j = 0; j < rollouts.size(); ++j) {
    Embedding g;
    try {
      g = encoder.embed(rollouts[j]);
    } catch (const ZeroEmbedding&) {
      g = zero;
    }
    out[j] = degradation_penalty(g, prototypes, active, config);
  }
  return out;
}

std::vector<double> penalty_coefficients(
    std::span<const TokenSeq> rollouts,
    std::span<const DegradationAnnotation* const> annotations,
    const PrototypeMap& prototypes, const PenaltyConfig& config, TextEncoder& encoder) {
  if (annotations.empty() || config.lambda == 0.0) {
    return std::vector<double>(rollouts.size(), 0.0);
  }
  auto d = rollout_penalties(rollouts, annotations, prototypes, config, encoder);
  for (double& x : d) x *= config.lambda;
  return d;
}

double clipped_surrogate(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

bool surrogate_has_gradient(double ratio, double advantage, double eps) {
  if (advantage > 0.0) return ratio <= 1.0 + eps;
  if (advantage < 0.0) return ratio >= 1.0 - eps;
  return false;
}

}  // namespace culcap
