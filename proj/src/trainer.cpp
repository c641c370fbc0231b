#include "culcap/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace culcap {

using nlohmann::json;

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kConfig, what);
  };
  require(max_len >= 1, "max_len must be positive");
  require(sft_lr > 0.0 && std::isfinite(sft_lr), "sft_lr must be positive");
  require(grpo_lr > 0.0 && std::isfinite(grpo_lr), "grpo_lr must be positive");
  require(stage3_lr > 0.0 && std::isfinite(stage3_lr), "stage3_lr must be positive");
  require(sft_batch_size >= 1, "sft_batch_size must be positive");
  require(grpo_batch_size >= 1, "grpo_batch_size must be positive");
  require(k >= 2, "K must be at least 2");
  require(temperature > 0.0 && std::isfinite(temperature), "temperature must be positive");
  require(clip_epsilon > 0.0 && clip_epsilon < 1.0, "clip_epsilon must be in (0, 1)");
  require(kl_beta >= 0.0 && std::isfinite(kl_beta), "kl_beta must be >= 0");
  require(reuse_epochs >= 1, "reuse_epochs must be positive");
  const double fracs[] = {mixture.new_eastern_frac, mixture.paired_eastern_frac,
                          mixture.western_replay_frac};
  double sum = 0.0;
  for (double f : fracs) {
    require(f >= 0.0 && f <= 1.0, "mixture fractions must be in [0, 1]");
    sum += f;
  }
  require(std::abs(sum - 1.0) <= 1e-9, "mixture fractions must sum to 1");
  try {
    penalty.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
}

std::string TrainConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "seed=" << seed << "\nmax_len=" << max_len << "\nsft_lr=" << sft_lr
     << "\nsft_batch_size=" << sft_batch_size << "\nstage1_steps=" << stage1_steps
     << "\ngrpo_lr=" << grpo_lr << "\ngrpo_batch_size=" << grpo_batch_size
     << "\nstage2_steps=" << stage2_steps << "\nK=" << k << "\ntemperature=" << temperature
     << "\nclip_epsilon=" << clip_epsilon << "\nkl_beta=" << kl_beta
     << "\nreuse_epochs=" << reuse_epochs << "\npenalty_m=" << penalty.m
     << "\npenalty_lambda=" << penalty.lambda;
  for (const auto& [id, w] : penalty.direction_weights) os << "\nweight." << id << "=" << w;
  os << "\nstage3_lr=" << stage3_lr << "\nstage3_steps=" << stage3_steps
     << "\nstage3_total=" << stage3_total << "\nmix_new_eastern=" << mixture.new_eastern_frac
     << "\nmix_paired_eastern=" << mixture.paired_eastern_frac
     << "\nmix_western_replay=" << mixture.western_replay_frac << "\n";
  return os.str();
}

StageState StageState::initial(const Corpus& corpus, const TrainConfig& config) {
  StageState s;
  s.params = PolicyParams::zeros(corpus.lexicon.vocab, config.max_len);
  s.seed = config.seed;
  s.config_hash = config.hash();
  s.corpus_hash = corpus.content_hash;
  return s;
}

StageState StageState::from_checkpoint(const CheckpointRecord& record) {
  StageState s;
  s.stage = record.stage;
  s.params = record.params;
  s.step = record.step;
  s.seed = record.seed;
  s.config_hash = record.config_hash;
  s.corpus_hash = record.corpus_hash;
  s.trained_images.insert(record.trained_images.begin(), record.trained_images.end());
  return s;
}

CheckpointRecord StageState::checkpoint() const {
  CheckpointRecord r;
  r.stage = stage;
  r.step = step;
  r.seed = seed;
  r.config_hash = config_hash;
  r.corpus_hash = corpus_hash;
  r.params = params;
  r.trained_images.assign(trained_images.begin(), trained_images.end());
  return r;
}

std::string transcript_jsonl(const StageState& state) {
  std::string out;
  json header = {{"record", "header"},
                 {"stage", state.stage},
                 {"seed", state.seed},
                 {"config_hash", hex64(state.config_hash)},
                 {"corpus_hash", hex64(state.corpus_hash)},
                 {"samples", state.samples},
                 {"steps", state.history.size()}};
  out += header.dump() + "\n";
  for (const auto& r : state.history) {
    json j = {{"step", r.step},
              {"stage", state.stage},
              {"loss_or_mean_reward", r.value},
              {"degenerate_rate", r.degenerate_rate},
              {"mean_penalty", r.mean_penalty},
              {"mean_cf", r.mean_cf},
              {"outrank_fraction", r.outrank_fraction},
              {"wallclock", r.wallclock},
              {"images", r.images}};
    out += j.dump() + "\n";
  }
  return out;
}

EpochSampler::EpochSampler(std::size_t n, std::uint64_t seed) : n_(n), rng_(seed) {
  if (n_ == 0) throw Error(ErrorCode::kInsufficientPool, "cannot sample from an empty pool");
}

std::vector<std::size_t> EpochSampler::next(std::size_t batch_size) {
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  while (out.size() < batch_size) {
    if (pos_ == order_.size()) {
      order_.resize(n_);
      for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
      seeded_shuffle(order_, rng_);
      pos_ = 0;
    }
    out.push_back(order_[pos_++]);
  }
  return out;
}

namespace {

void require_not_benchmark(const Corpus& corpus, const std::string& image_id) {
  if (corpus.split.is_benchmark(image_id)) {
    throw Error(ErrorCode::kBenchmarkLeak, "benchmark image " + image_id + " in a training pool");
  }
}

class StageClock {
 public:
  explicit StageClock(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

std::vector<SftExample> as_sft(std::span<const CaptionExample> examples) {
  std::vector<SftExample> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    out.push_back(SftExample{e.image->descriptor_tokens, e.context, e.target});
  }
  return out;
}

void run_sft_loop(StageState& state, std::span<const CaptionExample> examples, double lr,
                  std::size_t steps, std::size_t batch_size, std::uint64_t seed,
                  bool record_wallclock) {
  state.samples = examples.size();
  if (steps == 0) return;
  EpochSampler sampler(examples.size(), seed);
  StageClock clock(record_wallclock);
  std::vector<CaptionExample> batch;
  for (std::size_t s = 0; s < steps; ++s) {
    batch.clear();
    StepRecord rec;
    for (std::size_t i : sampler.next(batch_size)) {
      batch.push_back(examples[i]);
      rec.images.push_back(examples[i].image->image_id);
    }
    const auto sft = as_sft(batch);
    LossAndGrad lg = sft_loss_and_grad(state.params, sft);
    state.params = apply_update(state.params, lg.grad, lr);
    ++state.step;
    rec.step = state.step;
    rec.value = lg.loss;
    rec.wallclock = clock.seconds();
    state.trained_images.insert(rec.images.begin(), rec.images.end());
    state.history.push_back(std::move(rec));
  }
}

}  // namespace

std::vector<CaptionExample> caption_examples(const Corpus& corpus,
                                             std::span<const CaptionRecord> records) {
  const TokenId eos = corpus.lexicon.vocab.eos();
  std::vector<CaptionExample> out;
  out.reserve(records.size());
  for (const auto& c : records) {
    require_not_benchmark(corpus, c.image_id);
    CaptionExample e;
    e.image = &corpus.image(c.image_id);
    e.context = c.context;
    e.target = c.text;
    e.target.push_back(eos);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<CaptionExample> stage1_examples(const Corpus& corpus) {
  std::vector<CaptionRecord> records;
  bool any_western = false;
  for (const auto& c : corpus.captions) {
    if (corpus.split.part_of(c.image_id) != DatasetSplit::Part::kTrain) continue;
    if (c.context != CultureContext::kWestern) continue;
    if (c.role == CaptionRole::kTraining) {
      any_western = true;
      records.push_back(c);
    } else if (c.role == CaptionRole::kRefusal) {
      records.push_back(c);
    }
  }
  if (!any_western) {
    throw Error(ErrorCode::kInsufficientPool, "corpus has no Western training captions");
  }
  return caption_examples(corpus, records);
}

double mean_uniform_loss(std::span<const CaptionExample> examples, std::size_t vocab_size) {
  double total = 0.0;
  for (const auto& e : examples) total += static_cast<double>(e.target.size());
  return total / static_cast<double>(examples.size()) *
         std::log(static_cast<double>(vocab_size));
}

double dataset_loss(const PolicyParams& params, std::span<const CaptionExample> examples) {
  return sft_loss(params, as_sft(examples));
}

namespace {

std::vector<GrpoSample> western_samples(const Corpus& corpus, DatasetSplit::Part part,
                                        bool with_annotations) {
  std::vector<GrpoSample> out;
  for (const auto& c : corpus.captions) {
    if (corpus.split.part_of(c.image_id) != part) continue;
    if (c.context != CultureContext::kWestern || c.role != CaptionRole::kTraining) continue;
    require_not_benchmark(corpus, c.image_id);
    GrpoSample s;
    s.image = &corpus.image(c.image_id);
    s.context = CultureContext::kWestern;
    s.reference = c;
    if (with_annotations) s.annotations = corpus.annotations_for(c.image_id);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<GrpoSample> stage2_samples(const Corpus& corpus) {
  return western_samples(corpus, DatasetSplit::Part::kTrain, true);
}

std::vector<GrpoSample> dev_samples(const Corpus& corpus) {
  return western_samples(corpus, DatasetSplit::Part::kDev, false);
}

StepRecord grpo_step(StageState& state, std::span<const GrpoSample> batch, GrpoEnv& env,
                     const TrainConfig& config, std::uint64_t step_seed) {
  const std::size_t b = batch.size();
  const std::size_t k = config.k;
  const SimJudgeWeights weights;

  std::vector<CandidateSet> sets;
  sets.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    const GrpoSample& s = batch[i];
    Condition cond{s.image->descriptor_tokens, s.context};
    auto rollouts = sample_rollouts(state.params, cond, k, config.temperature,
                                    derive_seed(step_seed, {i, 0}));
    sets.push_back(make_candidate_set(*s.image, s.context, std::move(rollouts), s.reference,
                                      derive_seed(step_seed, {i, 1})));
  }
  const auto rankings = env.judge.rank_many(sets);
  if (rankings.size() != b) {
    throw JudgeProtocolError("judge returned " + std::to_string(rankings.size()) +
                             " rankings for " + std::to_string(b) + " candidate sets");
  }

  StepRecord rec;
  std::vector<AdvantageVector> advantages(b);
  std::vector<std::vector<double>> penalties(b);
  double reward_sum = 0.0, cf_sum = 0.0, penalty_sum = 0.0;
  std::size_t outranked = 0, degenerate = 0;
  for (std::size_t i = 0; i < b; ++i) {
    const GrpoSample& s = batch[i];
    const CandidateSet& set = sets[i];
    // Guard again here: no ranking reaches the reward unless it is a permutation.
    if (!is_permutation_of_range(rankings[i].ranking, set.size())) {
      throw JudgeProtocolError("ranking is not a permutation of the candidate set");
    }
    const std::size_t rank_ref = rankings[i].rank_of(set.reference_index());
    std::vector<double> rewards(k);
    std::vector<TokenSeq> texts(k);
    for (std::size_t j = 0; j < k; ++j) {
      rewards[j] = rank_to_reward(rankings[i].rank_of(j), rank_ref, k);
      texts[j] = set.rollouts[j].tokens;
      reward_sum += rewards[j];
      outranked += rewards[j] > 0.0 ? 1 : 0;
      cf_sum += simulated_score(env.lexicon, *s.image, s.context, texts[j], weights).scores.cf;
    }
    advantages[i] = group_advantages(rewards);
    degenerate += advantages[i].degenerate ? 1 : 0;
    penalties[i] = rollout_penalties(texts, s.annotations, env.prototypes, config.penalty,
                                     env.encoder);
    for (double d : penalties[i]) penalty_sum += d;
    rec.images.push_back(s.image->image_id);
  }

  const double norm = static_cast<double>(k * b);
  const double lambda = config.penalty.lambda;
  for (std::size_t epoch = 0; epoch < config.reuse_epochs; ++epoch) {
    GradientBuffer grad = GradientBuffer::zeros_like(state.params);
    bool any = false;
    for (std::size_t i = 0; i < b; ++i) {
      if (advantages[i].degenerate) continue;
      const GrpoSample& s = batch[i];
      Condition cond{s.image->descriptor_tokens, s.context};
      for (std::size_t j = 0; j < k; ++j) {
        const SequenceSample& roll = sets[i].rollouts[j];
        const double logp = log_prob(state.params, cond, roll.tokens);
        const double ratio = std::exp(logp - roll.logprob);
        const double a = advantages[i].values[j];
        double coef = surrogate_has_gradient(ratio, a, config.clip_epsilon) ? -a * ratio : 0.0;
        coef += lambda * penalties[i][j];
        if (config.kl_beta > 0.0) {
          coef += config.kl_beta * (logp - log_prob(env.reference_params, cond, roll.tokens));
        }
        if (coef == 0.0) continue;
        accumulate_logprob_grad(state.params, cond, roll.tokens, coef / norm, grad.tables);
        any = true;
      }
    }
    if (any) state.params = apply_update(state.params, grad, config.grpo_lr);
  }

  for (const auto& id : rec.images) state.trained_images.insert(id);
  ++state.step;
  rec.step = state.step;
  rec.value = reward_sum / norm;
  rec.degenerate_rate = static_cast<double>(degenerate) / static_cast<double>(b);
  rec.mean_penalty = penalty_sum / norm;
  rec.mean_cf = cf_sum / norm;
  rec.outrank_fraction = static_cast<double>(outranked) / norm;
  return rec;
}

StageState run_stage1_sft(const TrainConfig& config, const Corpus& corpus) {
  config.validate();
  const auto examples = stage1_examples(corpus);
  StageState state = StageState::initial(corpus, config);
  state.stage = "stage1";
  run_sft_loop(state, examples, config.sft_lr, config.stage1_steps, config.sft_batch_size,
               derive_seed(config.seed, {1}), config.record_wallclock);
  return state;
}

StageState run_stage2_grpo(const TrainConfig& config, const Corpus& corpus,
                           const StageState& stage1, JudgeBackend& judge,
                           TextEncoder& encoder) {
  config.validate();
  const auto samples = stage2_samples(corpus);
  if (samples.empty()) {
    throw Error(ErrorCode::kInsufficientPool, "no Western training captions for stage 2");
  }
  const PrototypeMap prototypes = build_prototypes(corpus.degradations, encoder);
  StageState state = stage1;
  state.stage = "stage2";
  state.seed = config.seed;
  state.config_hash = config.hash();
  state.history.clear();
  state.samples = samples.size();
  const PolicyParams reference = stage1.params;
  GrpoEnv env{corpus.lexicon, judge, encoder, prototypes, reference};
  EpochSampler sampler(samples.size(), derive_seed(config.seed, {2}));
  StageClock clock(config.record_wallclock);
  std::vector<GrpoSample> batch;
  for (std::size_t s = 0; s < config.stage2_steps; ++s) {
    batch.clear();
    for (std::size_t i : sampler.next(config.grpo_batch_size)) batch.push_back(samples[i]);
    StepRecord rec = grpo_step(state, batch, env, config, derive_seed(config.seed, {2, s}));
    rec.wallclock = clock.seconds();
    state.history.push_back(std::move(rec));
  }
  return state;
}

StageState run_stage3_adapt(const TrainConfig& config, const Corpus& corpus,
                            const StageState& stage2) {
  config.validate();
  const auto records = build_stage3_mixture(config.stage3_total, config.mixture,
                                            stage3_pools(corpus), derive_seed(config.seed, {3}));
  const auto examples = caption_examples(corpus, records);
  StageState state = stage2;
  state.stage = "stage3";
  state.seed = config.seed;
  state.config_hash = config.hash();
  state.history.clear();
  run_sft_loop(state, examples, config.stage3_lr, config.stage3_steps, config.sft_batch_size,
               derive_seed(config.seed, {3, 1}), config.record_wallclock);
  return state;
}

PolicyProbe probe_policy(const PolicyParams& params, std::span<const GrpoSample> samples,
                         const Lexicon& lexicon, JudgeBackend& judge, TextEncoder& encoder,
                         const PrototypeMap& prototypes, const TrainConfig& config,
                         std::uint64_t seed, const std::string& direction) {
  PolicyProbe probe;
  if (samples.empty()) return probe;
  const std::size_t k = config.k;
  const SimJudgeWeights weights;
  std::vector<CandidateSet> sets;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const GrpoSample& s = samples[i];
    Condition cond{s.image->descriptor_tokens, s.context};
    sets.push_back(make_candidate_set(
        *s.image, s.context,
        sample_rollouts(params, cond, k, config.temperature, derive_seed(seed, {i, 0})),
        s.reference, derive_seed(seed, {i, 1})));
  }
  const auto rankings = judge.rank_many(sets);
  const auto proto = prototypes.find(direction);
  double reward = 0.0, cf = 0.0, pen = 0.0, cos = 0.0;
  std::size_t outranked = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t rank_ref = rankings[i].rank_of(sets[i].reference_index());
    std::vector<TokenSeq> texts;
    for (std::size_t j = 0; j < k; ++j) {
      const TokenSeq& y = sets[i].rollouts[j].tokens;
      texts.push_back(y);
      const double r = rank_to_reward(rankings[i].rank_of(j), rank_ref, k);
      reward += r;
      outranked += r > 0.0 ? 1 : 0;
      cf += simulated_score(lexicon, *samples[i].image, samples[i].context, y, weights).scores.cf;
      if (proto != prototypes.end()) {
        try {
          cos += cosine(encoder.embed(y), proto->second.vector);
        } catch (const ZeroEmbedding&) {
        }
      }
    }
    for (double d : rollout_penalties(texts, samples[i].annotations, prototypes,
                                      config.penalty, encoder)) {
      pen += d;
    }
  }
  const double n = static_cast<double>(samples.size() * k);
  probe.mean_reward = reward / n;
  probe.mean_cf = cf / n;
  probe.outrank_fraction = static_cast<double>(outranked) / n;
  probe.mean_penalty = pen / n;
  probe.mean_prototype_cosine = cos / n;
  return probe;
}

}  // namespace culcap
