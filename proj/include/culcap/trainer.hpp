#pragma once

#include <set>
#include <string>
#include <vector>

#include "culcap/checkpoint.hpp"
#include "culcap/corpus.hpp"
#include "culcap/judge.hpp"
#include "culcap/reward.hpp"

namespace culcap {

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t max_len = 20;

  double sft_lr = 2.0;
  std::size_t sft_batch_size = 16;
  std::size_t stage1_steps = 200;

  double grpo_lr = 0.5;
  std::size_t grpo_batch_size = 8;
  std::size_t stage2_steps = 300;
  std::size_t k = 8;
  double temperature = 1.0;
  double clip_epsilon = 0.2;
  double kl_beta = 0.0;
  // Gradient updates per sampled batch.
  std::size_t reuse_epochs = 1;
  PenaltyConfig penalty;

  double stage3_lr = 2.0;
  std::size_t stage3_steps = 400;
  std::size_t stage3_total = 100;
  StageMixture mixture;

  bool record_wallclock = false;

  // Throws kConfig.
  void validate() const;
  // Stable key=value listing; the config hash is its FNV-1a.
  std::string canonical() const;
  std::uint64_t hash() const { return fnv1a(canonical()); }
};

struct StepRecord {
  std::size_t step = 0;
  double value = 0.0;  // SFT loss or GRPO mean reward
  double degenerate_rate = 0.0;
  double mean_penalty = 0.0;
  double mean_cf = 0.0;
  double outrank_fraction = 0.0;
  double wallclock = 0.0;
  std::vector<std::string> images;
};

struct StageState {
  std::string stage = "base";
  PolicyParams params;
  std::size_t step = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t corpus_hash = 0;
  std::size_t samples = 0;  // records in the stage's training pool
  std::vector<StepRecord> history;
  std::set<std::string> trained_images;  // cumulative over stages

  static StageState initial(const Corpus& corpus, const TrainConfig& config);
  static StageState from_checkpoint(const CheckpointRecord& record);
  CheckpointRecord checkpoint() const;
};

// Header line then one JSON record per step.
std::string transcript_jsonl(const StageState& state);

// Fixed-size batches over a seeded per-epoch shuffle of 0..n-1.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::uint64_t seed);
  std::vector<std::size_t> next(std::size_t batch_size);

 private:
  std::size_t n_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

struct CaptionExample {
  const ImageRecord* image = nullptr;
  CultureContext context = CultureContext::kNone;
  TokenSeq target;  // ends in EOS
};

// Western training and refusal captions of train-split images.
std::vector<CaptionExample> stage1_examples(const Corpus& corpus);
std::vector<CaptionExample> caption_examples(const Corpus& corpus,
                                             std::span<const CaptionRecord> records);
double mean_uniform_loss(std::span<const CaptionExample> examples, std::size_t vocab_size);
double dataset_loss(const PolicyParams& params, std::span<const CaptionExample> examples);

// One (image, context) prompt for GRPO with its reference anchor.
struct GrpoSample {
  const ImageRecord* image = nullptr;
  CultureContext context = CultureContext::kWestern;
  CaptionRecord reference;
  std::vector<const DegradationAnnotation*> annotations;
};

// Western training captions of train images (refusals excluded).
std::vector<GrpoSample> stage2_samples(const Corpus& corpus);
// Western captions of dev images, no annotations.
std::vector<GrpoSample> dev_samples(const Corpus& corpus);

struct GrpoEnv {
  const Lexicon& lexicon;
  JudgeBackend& judge;
  TextEncoder& encoder;
  const PrototypeMap& prototypes;
  const PolicyParams& reference_params;  // KL anchor
};

StepRecord grpo_step(StageState& state, std::span<const GrpoSample> batch, GrpoEnv& env,
                     const TrainConfig& config, std::uint64_t step_seed);

StageState run_stage1_sft(const TrainConfig& config, const Corpus& corpus);
StageState run_stage2_grpo(const TrainConfig& config, const Corpus& corpus,
                           const StageState& stage1, JudgeBackend& judge,
                           TextEncoder& encoder);
StageState run_stage3_adapt(const TrainConfig& config, const Corpus& corpus,
                            const StageState& stage2);

// Rollout statistics of fixed params on fixed prompts; no update.
struct PolicyProbe {
  double mean_reward = 0.0;
  double mean_cf = 0.0;
  double outrank_fraction = 0.0;
  double mean_penalty = 0.0;
  // Against prototypes[direction]; 0 when the direction is absent.
  double mean_prototype_cosine = 0.0;
};

PolicyProbe probe_policy(const PolicyParams& params, std::span<const GrpoSample> samples,
                         const Lexicon& lexicon, JudgeBackend& judge, TextEncoder& encoder,
                         const PrototypeMap& prototypes, const TrainConfig& config,
                         std::uint64_t seed, const std::string& direction = "");

}  // namespace culcap
