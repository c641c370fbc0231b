#include "culcap/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace culcap {

ParamTables ParamTables::zeros(std::size_t vocab_size) {
  ParamTables t;
  t.vocab_size = vocab_size;
  t.prev.assign(vocab_size * vocab_size, 0.0);
  t.context.assign(3 * vocab_size, 0.0);
  t.image.assign(vocab_size * vocab_size, 0.0);
  return t;
}

bool ParamTables::same_shape(const ParamTables& other) const {
  return vocab_size == other.vocab_size && prev.size() == other.prev.size() &&
         context.size() == other.context.size() && image.size() == other.image.size();
}

bool ParamTables::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(prev) && finite(context) && finite(image);
}

void ParamTables::add_scaled(const ParamTables& other, double scale) {
  if (!same_shape(other)) {
    throw Error(ErrorCode::kShapeMismatch, "parameter table shapes differ");
  }
  for (std::size_t i = 0; i < prev.size(); ++i) prev[i] += scale * other.prev[i];
  for (std::size_t i = 0; i < context.size(); ++i) context[i] += scale * other.context[i];
  for (std::size_t i = 0; i < image.size(); ++i) image[i] += scale * other.image[i];
}

double& ParamTables::at_flat(std::size_t i) {
  if (i < prev.size()) return prev[i];
  i -= prev.size();
  if (i < context.size()) return context[i];
  return image.at(i - context.size());
}

double ParamTables::at_flat(std::size_t i) const {
  return const_cast<ParamTables&>(*this).at_flat(i);
}

PolicyParams PolicyParams::zeros(const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_len must be positive");
  }
  PolicyParams p;
  p.tables = ParamTables::zeros(vocab.size());
  p.max_len = max_len;
  p.bos = vocab.bos();
  p.eos = vocab.eos();
  return p;
}

GradientBuffer GradientBuffer::zeros_like(const PolicyParams& params) {
  return GradientBuffer{ParamTables::zeros(params.vocab_size()), 0};
}

void GradientBuffer::reset() {
  std::fill(tables.prev.begin(), tables.prev.end(), 0.0);
  std::fill(tables.context.begin(), tables.context.end(), 0.0);
  std::fill(tables.image.begin(), tables.image.end(), 0.0);
  count = 0;
}

GradientBuffer& GradientBuffer::operator+=(const GradientBuffer& other) {
  tables.add_scaled(other.tables, 1.0);
  count += other.count;
  return *this;
}

void log_softmax(std::span<const double> logits, std::span<double> out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : logits) mx = std::max(mx, l);
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

namespace {

void check_condition(const PolicyParams& params, const Condition& cond) {
  for (TokenId d : cond.descriptors) {
    if (d < 0 || static_cast<std::size_t>(d) >= params.vocab_size()) {
      throw Error(ErrorCode::kUnknownToken,
                  "descriptor token id " + std::to_string(d) + " out of range");
    }
  }
}

void check_sequence(const PolicyParams& params, std::span<const TokenId> y) {
  if (y.empty()) throw Error(ErrorCode::kEmptySequence, "empty token sequence");
  if (y.size() > params.max_len) {
    throw Error(ErrorCode::kInvalidArgument,
                "sequence length " + std::to_string(y.size()) + " exceeds max_len " +
                    std::to_string(params.max_len));
  }
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (y[t] < 0 || static_cast<std::size_t>(y[t]) >= params.vocab_size()) {
      throw Error(ErrorCode::kUnknownToken,
                  "token id " + std::to_string(y[t]) + " out of range");
    }
    if (y[t] == params.eos && t + 1 != y.size()) {
      throw Error(ErrorCode::kInvalidArgument, "EOS before the end of the sequence");
    }
  }
}

std::size_t row(TokenId t, std::size_t v) { return static_cast<std::size_t>(t) * v; }

}  // namespace

StepLogits::StepLogits(const PolicyParams& params, const Condition& cond)
    : params_(params) {
  check_condition(params, cond);
  const std::size_t v = params.vocab_size();
  const auto& tb = params.tables;
  base_.assign(tb.context.begin() + static_cast<std::ptrdiff_t>(
                                        static_cast<std::size_t>(cond.context) * v),
               tb.context.begin() + static_cast<std::ptrdiff_t>(
                                        (static_cast<std::size_t>(cond.context) + 1) * v));
  if (!cond.descriptors.empty()) {
    const double inv = 1.0 / static_cast<double>(cond.descriptors.size());
    for (TokenId d : cond.descriptors) {
      const double* r = tb.image.data() + row(d, v);
      for (std::size_t i = 0; i < v; ++i) base_[i] += inv * r[i];
    }
  }
}

void StepLogits::compute(TokenId prev, std::span<double> out) const {
  const std::size_t v = params_.vocab_size();
  const double* r = params_.tables.prev.data() + row(prev, v);
  for (std::size_t i = 0; i < v; ++i) out[i] = base_[i] + r[i];
}

double log_prob(const PolicyParams& params, const Condition& cond,
                std::span<const TokenId> y) {
  return log_prob(params, cond, y, nullptr);
}

double log_prob(const PolicyParams& params, const Condition& cond,
                std::span<const TokenId> y, std::vector<double>* per_token) {
  check_sequence(params, y);
  StepLogits step(params, cond);
  const std::size_t v = params.vocab_size();
  std::vector<double> logits(v), lp(v);
  if (per_token) per_token->clear();
  double total = 0.0;
  TokenId prev = params.bos;
  for (TokenId tok : y) {
    step.compute(prev, logits);
    log_softmax(logits, lp);
    const double term = lp[static_cast<std::size_t>(tok)];
    total += term;
    if (per_token) per_token->push_back(term);
    prev = tok;
  }
  return total;
}

double accumulate_logprob_grad(const PolicyParams& params, const Condition& cond,
                               std::span<const TokenId> y, double scale,
                               ParamTables& grad) {
  check_sequence(params, y);
  if (!grad.same_shape(params.tables)) {
    throw Error(ErrorCode::kShapeMismatch, "gradient buffer shape differs from params");
  }
  StepLogits step(params, cond);
  const std::size_t v = params.vocab_size();
  const std::size_t ctx_row = static_cast<std::size_t>(cond.context) * v;
  const double inv_d =
      cond.descriptors.empty() ? 0.0 : 1.0 / static_cast<double>(cond.descriptors.size());
  std::vector<double> logits(v), lp(v), dlogits(v);
  double total = 0.0;
  TokenId prev = params.bos;
  for (TokenId tok : y) {
    step.compute(prev, logits);
    log_softmax(logits, lp);
    total += lp[static_cast<std::size_t>(tok)];
    // d log softmax[tok] / d logits = onehot(tok) - softmax
    for (std::size_t i = 0; i < v; ++i) dlogits[i] = -scale * std::exp(lp[i]);
    dlogits[static_cast<std::size_t>(tok)] += scale;

    double* gp = grad.prev.data() + row(prev, v);
    double* gc = grad.context.data() + ctx_row;
    for (std::size_t i = 0; i < v; ++i) {
      gp[i] += dlogits[i];
      gc[i] += dlogits[i];
    }
    for (TokenId d : cond.descriptors) {
      double* gi = grad.image.data() + row(d, v);
      for (std::size_t i = 0; i < v; ++i) gi[i] += inv_d * dlogits[i];
    }
    prev = tok;
  }
  return total;
}

std::vector<SequenceSample> sample_rollouts(const PolicyParams& params,
                                            const Condition& cond, std::size_t k,
                                            double temperature, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "need K >= 2 rollouts");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be positive");
  }
  StepLogits step(params, cond);
  const std::size_t v = params.vocab_size();
  std::vector<double> logits(v), lp(v);
  Rng rng(seed);
  std::vector<SequenceSample> out;
  out.reserve(k);
  for (std::size_t s = 0; s < k; ++s) {
    SequenceSample sample;
    TokenId prev = params.bos;
    while (sample.tokens.size() < params.max_len) {
      step.compute(prev, logits);
      if (temperature != 1.0) {
        for (double& l : logits) l /= temperature;
      }
      log_softmax(logits, lp);
      // Inverse-CDF draw: one uniform per step keeps streams aligned across
      // nearby parameter values.
      const double u = uniform01(rng);
      double cum = 0.0;
      std::size_t pick = v;
      std::size_t last_positive = 0;
      for (std::size_t i = 0; i < v; ++i) {
        const double p = std::exp(lp[i]);
        if (p > 0.0) last_positive = i;
        cum += p;
        if (u < cum) {
          pick = i;
          break;
        }
      }
      if (pick == v) pick = last_positive;
      const auto tok = static_cast<TokenId>(pick);
      sample.tokens.push_back(tok);
      prev = tok;
      if (tok == params.eos) break;
    }
    sample.logprob = log_prob(params, cond, sample.tokens, &sample.per_token_logprobs);
    out.push_back(std::move(sample));
  }
  return out;
}

LossAndGrad sft_loss_and_grad(const PolicyParams& params,
                              std::span<const SftExample> batch) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty SFT batch");
  LossAndGrad out{0.0, GradientBuffer::zeros_like(params)};
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    Condition cond{ex.descriptors, ex.context};
    out.loss -= inv_b * accumulate_logprob_grad(params, cond, ex.target, -inv_b,
                                                out.grad.tables);
  }
  out.grad.count = batch.size();
  return out;
}

double sft_loss(const PolicyParams& params, std::span<const SftExample> batch) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty SFT batch");
  double loss = 0.0;
  for (const auto& ex : batch) {
    loss -= log_prob(params, Condition{ex.descriptors, ex.context}, ex.target);
  }
  return loss / static_cast<double>(batch.size());
}

GradientBuffer policy_gradient_term(const PolicyParams& params, const Condition& cond,
                                    std::span<const TokenId> y, double coefficient) {
  GradientBuffer g = GradientBuffer::zeros_like(params);
  if (coefficient != 0.0) accumulate_logprob_grad(params, cond, y, coefficient, g.tables);
  else check_sequence(params, y);
  g.count = 1;
  return g;
}

PolicyParams apply_update(const PolicyParams& params, const GradientBuffer& grad,
                          double lr) {
  if (!params.tables.same_shape(grad.tables)) {
    throw Error(ErrorCode::kShapeMismatch, "gradient shape differs from params");
  }
  if (!grad.tables.all_finite()) {
    throw Error(ErrorCode::kNonFiniteGradient, "gradient has non-finite entries");
  }
  PolicyParams next = params;
  next.tables.add_scaled(grad.tables, -lr);
  return next;
}

}  // namespace culcap
