#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "culcap/corpus.hpp"
#include "culcap/embedding.hpp"

namespace culcap {

// (rank_ref - rank_j) / K. Ranks are 1-based in 1..K+1; kRangeError otherwise.
double rank_to_reward(std::size_t rank_j, std::size_t rank_ref, std::size_t k);

struct AdvantageVector {
  std::vector<double> values;
  bool degenerate = false;
};

// (r - mean) / (population std + epsilon); all zeros when every reward is equal.
AdvantageVector group_advantages(std::span<const double> rewards, double epsilon = 1e-8);

struct DegradationPrototype {
  std::string direction_id;
  Embedding vector;
  std::size_t evidence_count = 0;
};

using PrototypeMap = std::map<std::string, DegradationPrototype>;

struct PenaltyConfig {
  double m = 0.7;
  double lambda = 0.1;
  std::map<std::string, double> direction_weights;  // missing = 1.0

  double weight_of(const std::string& direction_id) const;
  void validate() const;
};

// Normalised mean of every evidence embedding per direction, pooled over
// annotations. Throws DegeneratePrototype naming the first bad direction.
PrototypeMap build_prototypes(std::span<const DegradationAnnotation> annotations,
                              TextEncoder& encoder);

// sum_d w_d * max(0, cos(g, p_d) - m), w_d = active weight * config weight.
double degradation_penalty(const Embedding& g, const PrototypeMap& prototypes,
                           std::span<const std::pair<std::string, double>> active,
                           const PenaltyConfig& config);

// Active (direction, weight) pairs of one sample.
std::vector<std::pair<std::string, double>> active_directions(
    std::span<const DegradationAnnotation* const> annotations);

// Unscaled penalty d_j per rollout. A rollout without a usable embedding
// (empty or zero-norm) has cosine 0 to every prototype.
std::vector<double> rollout_penalties(std::span<const TokenSeq> rollouts,
                                      std::span<const DegradationAnnotation* const> annotations,
                                      const PrototypeMap& prototypes,
                                      const PenaltyConfig& config, TextEncoder& encoder);

// lambda * d_j for annotated samples, zeros otherwise.
std::vector<double> penalty_coefficients(
    std::span<const TokenSeq> rollouts,
    std::span<const DegradationAnnotation* const> annotations,
    const PrototypeMap& prototypes, const PenaltyConfig& config, TextEncoder& encoder);

// min(r * A, clip(r, 1 - eps, 1 + eps) * A)
double clipped_surrogate(double ratio, double advantage, double eps);
// True when the clipped surrogate has a non-zero derivative in the ratio.
bool surrogate_has_gradient(double ratio, double advantage, double eps);

}  // namespace culcap
