#pragma once

#include <span>
#include <vector>

#include "culcap/common.hpp"
#include "culcap/vocab.hpp"

namespace culcap {

// Dense parameter tables of the conditional bigram policy. Logits at step t
// are prev[y_{t-1}] + context[c] + mean_{d in descriptors} image[d].
struct ParamTables {
  std::size_t vocab_size = 0;
  std::vector<double> prev;     // V x V, row = previous token
  std::vector<double> context;  // 3 x V, row = CultureContext
  std::vector<double> image;    // V x V, row = descriptor token

  static ParamTables zeros(std::size_t vocab_size);

  bool same_shape(const ParamTables& other) const;
  bool all_finite() const;
  void add_scaled(const ParamTables& other, double scale);
  std::size_t num_entries() const {
    return prev.size() + context.size() + image.size();
  }
  // Flat view order: prev, context, image.
  double& at_flat(std::size_t i);
  double at_flat(std::size_t i) const;

  bool operator==(const ParamTables&) const = default;
};

struct PolicyParams {
  ParamTables tables;
  std::size_t max_len = 20;
  TokenId bos = 0;
  TokenId eos = 1;

  // All-zero tables: the uniform policy.
  static PolicyParams zeros(const Vocabulary& vocab, std::size_t max_len);
  std::size_t vocab_size() const { return tables.vocab_size; }
  bool operator==(const PolicyParams&) const = default;
};

struct GradientBuffer {
  ParamTables tables;
  std::size_t count = 0;

  static GradientBuffer zeros_like(const PolicyParams& params);
  void reset();
  GradientBuffer& operator+=(const GradientBuffer& other);
};

// The (x, c) a caption is conditioned on.
struct Condition {
  std::span<const TokenId> descriptors;
  CultureContext context = CultureContext::kNone;
};

struct SequenceSample {
  TokenSeq tokens;  // ends in EOS unless truncated at max_len
  double logprob = 0.0;
  std::vector<double> per_token_logprobs;
};

// Numerically stable log-softmax of `logits` into `out`.
void log_softmax(std::span<const double> logits, std::span<double> out);

// Logits for every step share context + image terms; this caches them.
class StepLogits {
 public:
  StepLogits(const PolicyParams& params, const Condition& cond);
  // Fills `out` (size V) with logits given the previous token.
  void compute(TokenId prev, std::span<double> out) const;

 private:
  const PolicyParams& params_;
  std::vector<double> base_;
};

// Sum over steps of log softmax(logits_t)[y_t]. y must be non-empty, within
// max_len, known tokens, and EOS only in final position.
double log_prob(const PolicyParams& params, const Condition& cond,
                std::span<const TokenId> y);

// Same, also returning per-token terms.
double log_prob(const PolicyParams& params, const Condition& cond,
                std::span<const TokenId> y, std::vector<double>* per_token);

// Adds scale * d log p(y) / d theta into `grad`; returns log p(y).
double accumulate_logprob_grad(const PolicyParams& params, const Condition& cond,
                               std::span<const TokenId> y, double scale,
                               ParamTables& grad);

// K ancestral samples from softmax(logits / temperature). Recorded
// log-probabilities are always at temperature 1.
std::vector<SequenceSample> sample_rollouts(const PolicyParams& params,
                                            const Condition& cond, std::size_t k,
                                            double temperature, std::uint64_t seed);

struct SftExample {
  std::span<const TokenId> descriptors;
  CultureContext context = CultureContext::kNone;
  TokenSeq target;  // ends in EOS
};

struct LossAndGrad {
  double loss = 0.0;
  GradientBuffer grad;
};

// loss = -sum_i log p(y_i | x_i, c_i) / batch_size, with its exact gradient.
LossAndGrad sft_loss_and_grad(const PolicyParams& params,
                              std::span<const SftExample> batch);

double sft_loss(const PolicyParams& params, std::span<const SftExample> batch);

// coefficient * grad log p(y | x, c).
GradientBuffer policy_gradient_term(const PolicyParams& params, const Condition& cond,
                                    std::span<const TokenId> y, double coefficient);

// params - lr * grad. Throws kNonFiniteGradient / kShapeMismatch.
PolicyParams apply_update(const PolicyParams& params, const GradientBuffer& grad,
                          double lr);

}  // namespace culcap
