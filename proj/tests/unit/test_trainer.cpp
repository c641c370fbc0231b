#include <gtest/gtest.h>

#include "culcap/trainer.hpp"
#include "fixtures.hpp"

using namespace culcap;
using culcap::testing::TempDir;

namespace {

TrainConfig quick_config() {
  TrainConfig c;
  c.stage1_steps = 30;
  c.stage2_steps = 4;
  c.grpo_batch_size = 4;
  c.k = 4;
  c.stage3_steps = 10;
  c.stage3_total = 20;
  return c;
}

// Puts rollout 0 first, the reference second, the other rollouts after.
class FavouriteJudge : public JudgeBackend {
 public:
  std::string name() const override { return "favourite"; }
  JudgeRanking rank(const CandidateSet& set) override {
    JudgeRanking r;
    r.ranking = {0, set.reference_index()};
    for (std::size_t j = 1; j < set.rollouts.size(); ++j) r.ranking.push_back(j);
    return r;
  }
  PairwiseVerdict compare(const ImageRecord&, CultureContext, std::span<const TokenId>,
                          std::span<const TokenId>, std::uint64_t) override {
    return {};
  }
  DimensionScore score(const ImageRecord&, CultureContext, std::span<const TokenId>,
                       std::span<const TokenId>) override {
    return {};
  }
};

}  // namespace

TEST(Stage1, LossDropsAndStepsZeroIsIdentity) {
  Corpus corpus = culcap::testing::small_corpus(3);
  TrainConfig cfg = quick_config();
  cfg.stage1_steps = 0;
  StageState zero = run_stage1_sft(cfg, corpus);
  EXPECT_EQ(zero.params, StageState::initial(corpus, cfg).params);
  EXPECT_TRUE(zero.history.empty());

  cfg.stage1_steps = 200;
  StageState s1 = run_stage1_sft(cfg, corpus);
  const auto examples = stage1_examples(corpus);
  const double uniform = mean_uniform_loss(examples, corpus.lexicon.vocab.size());
  EXPECT_NEAR(dataset_loss(zero.params, examples), uniform, 1e-9);
  EXPECT_LE(dataset_loss(s1.params, examples), 0.5 * uniform);
  ASSERT_EQ(s1.history.size(), 200u);
  for (const auto& r : s1.history) EXPECT_EQ(r.images.size(), cfg.sft_batch_size);
}

TEST(Stage1, RequiresWesternCaptions) {
  Corpus corpus = culcap::testing::small_corpus(3);
  std::erase_if(corpus.captions, [](const CaptionRecord& c) {
    return c.context == CultureContext::kWestern && c.role == CaptionRole::kTraining;
  });
  EXPECT_THROW(run_stage1_sft(quick_config(), corpus), Error);
}

TEST(Stages, DeterministicTranscriptsAndCheckpoints) {
  Corpus corpus = culcap::testing::small_corpus(3);
  TrainConfig cfg = quick_config();
  auto run = [&] {
    StageState s1 = run_stage1_sft(cfg, corpus);
    SimulatedJudge judge(corpus.lexicon);
    HashedNgramEncoder enc(corpus.lexicon.vocab);
    StageState s2 = run_stage2_grpo(cfg, corpus, s1, judge, enc);
    StageState s3 = run_stage3_adapt(cfg, corpus, s2);
    std::string out;
    for (const auto* s : {&s1, &s2, &s3}) {
      out += transcript_jsonl(*s);
      out += dump_checkpoint(s->checkpoint(), corpus.lexicon.vocab);
    }
    return out;
  };
  const std::string a = run();
  EXPECT_EQ(a, run());
  cfg.seed = 2;
  EXPECT_NE(a, run());
}

TEST(Stage2, StepsZeroMatchesStage1) {
  Corpus corpus = culcap::testing::small_corpus(3);
  TrainConfig cfg = quick_config();
  StageState s1 = run_stage1_sft(cfg, corpus);
  cfg.stage2_steps = 0;
  SimulatedJudge judge(corpus.lexicon);
  HashedNgramEncoder enc(corpus.lexicon.vocab);
  StageState s2 = run_stage2_grpo(cfg, corpus, s1, judge, enc);
  EXPECT_EQ(s2.params, s1.params);
  EXPECT_EQ(s2.step, s1.step);
}

TEST(Stage2, LambdaIsInertWithoutAnnotations) {
  Corpus corpus = culcap::testing::small_corpus(3);
  corpus.degradations.clear();
  TrainConfig cfg = quick_config();
  cfg.stage2_steps = 6;
  cfg.penalty.m = -1.0;
  StageState s1 = run_stage1_sft(cfg, corpus);
  auto run = [&](double lambda) {
    cfg.penalty.lambda = lambda;
    SimulatedJudge judge(corpus.lexicon);
    HashedNgramEncoder enc(corpus.lexicon.vocab);
    return run_stage2_grpo(cfg, corpus, s1, judge, enc);
  };
  const StageState a = run(0.0), b = run(1.0);
  EXPECT_EQ(a.params, b.params);
  EXPECT_NE(a.params, s1.params);
}

TEST(Stage2, LambdaActsWithAnnotations) {
  Corpus corpus = culcap::testing::small_corpus(3);
  TrainConfig cfg = quick_config();
  cfg.stage2_steps = 6;
  cfg.grpo_batch_size = 16;
  cfg.penalty.m = -1.0;
  StageState s1 = run_stage1_sft(cfg, corpus);
  auto run = [&](double lambda) {
    cfg.penalty.lambda = lambda;
    SimulatedJudge judge(corpus.lexicon);
    HashedNgramEncoder enc(corpus.lexicon.vocab);
    return run_stage2_grpo(cfg, corpus, s1, judge, enc);
  };
  EXPECT_NE(run(0.0).params, run(1.0).params);
}

TEST(GrpoStep, ZeroCoefficientsLeaveParamsUnchanged) {
  Corpus corpus = culcap::testing::small_corpus(3);
  StageState s1 = run_stage1_sft(quick_config(), corpus);
  auto adv = group_advantages(std::vector<double>(6, 0.5));
  ASSERT_TRUE(adv.degenerate);
  GradientBuffer grad = GradientBuffer::zeros_like(s1.params);
  const ImageRecord& img = corpus.images[0];
  Condition cond{img.descriptor_tokens, CultureContext::kWestern};
  for (const auto& r : sample_rollouts(s1.params, cond, 6, 1.0, 4)) {
    accumulate_logprob_grad(s1.params, cond, r.tokens, 0.0, grad.tables);
  }
  EXPECT_EQ(apply_update(s1.params, grad, 0.5), s1.params);
}

// From the uniform policy the rollouts barely share gradient directions, so
// the favoured rollout's own term dominates the update.
TEST(GrpoStep, FavouredRolloutGainsProbability) {
  Corpus corpus = culcap::testing::small_corpus(3);
  TrainConfig cfg = quick_config();
  cfg.grpo_lr = 0.05;
  cfg.k = 6;
  cfg.max_len = 8;
  const StageState s0 = StageState::initial(corpus, cfg);
  FavouriteJudge judge;
  HashedNgramEncoder enc(corpus.lexicon.vocab);
  PrototypeMap protos;
  GrpoEnv env{corpus.lexicon, judge, enc, protos, s0.params};
  const auto samples = stage2_samples(corpus);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::vector<GrpoSample> batch = {samples[seed % samples.size()]};
    batch[0].annotations.clear();
    StageState state = s0;
    const GrpoSample& s = batch[0];
    Condition cond{s.image->descriptor_tokens, s.context};
    // grpo_step draws rollouts from this derived seed.
    const auto rollouts =
        sample_rollouts(state.params, cond, cfg.k, 1.0, derive_seed(seed, {0, 0}));
    const double before = log_prob(state.params, cond, rollouts[0].tokens);
    EXPECT_EQ(before, rollouts[0].logprob);
    StepRecord rec = grpo_step(state, batch, env, cfg, seed);
    EXPECT_GT(log_prob(state.params, cond, rollouts[0].tokens), before) << "seed " << seed;
    EXPECT_EQ(rec.degenerate_rate, 0.0);
    // Ranks: rollout 0 first, reference second, rollouts 1..5 at 3..7.
    EXPECT_NEAR(rec.value, (1.0 - 1.0 - 2.0 - 3.0 - 4.0 - 5.0) / (6.0 * 6.0), 1e-12);
  }
}

TEST(Checkpoint, RoundTripAndMismatch) {
  Corpus corpus = culcap::testing::small_corpus(3);
  StageState s1 = run_stage1_sft(quick_config(), corpus);
  TempDir dir("ckpt");
  save_checkpoint(dir.file("s1.json"), s1.checkpoint(), corpus.lexicon.vocab);
  auto rec = load_checkpoint(dir.file("s1.json"), corpus.lexicon.vocab, corpus.content_hash);
  StageState back = StageState::from_checkpoint(rec);
  EXPECT_EQ(back.params, s1.params);
  EXPECT_EQ(back.trained_images, s1.trained_images);
  EXPECT_EQ(dump_checkpoint(back.checkpoint(), corpus.lexicon.vocab),
            dump_checkpoint(s1.checkpoint(), corpus.lexicon.vocab));
  try {
    load_checkpoint(dir.file("s1.json"), corpus.lexicon.vocab, corpus.content_hash + 1);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCheckpointMismatch);
  }
  try {
    load_checkpoint(dir.file("none.json"), corpus.lexicon.vocab);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingCheckpoint);
  }
}

TEST(DataHygiene, BenchmarkImagesNeverTrained) {
  Corpus corpus = culcap::testing::small_corpus(3);
  TrainConfig cfg = quick_config();
  StageState s1 = run_stage1_sft(cfg, corpus);
  SimulatedJudge judge(corpus.lexicon);
  HashedNgramEncoder enc(corpus.lexicon.vocab);
  StageState s3 = run_stage3_adapt(cfg, corpus, run_stage2_grpo(cfg, corpus, s1, judge, enc));
  ASSERT_FALSE(s3.trained_images.empty());
  for (const auto& id : s3.trained_images) EXPECT_FALSE(corpus.split.is_benchmark(id)) << id;

  std::vector<CaptionRecord> leak;
  for (const auto& c : corpus.captions) {
    if (corpus.split.is_benchmark(c.image_id)) {
      leak.push_back(c);
      break;
    }
  }
  ASSERT_FALSE(leak.empty());
  try {
    caption_examples(corpus, leak);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBenchmarkLeak);
  }
}

TEST(Stage3, ConsumesDeclaredCount) {
  Corpus corpus = culcap::testing::small_corpus(3);
  TrainConfig cfg = quick_config();
  StageState s1 = run_stage1_sft(cfg, corpus);
  StageState s3 = run_stage3_adapt(cfg, corpus, s1);
  EXPECT_EQ(s3.samples, cfg.stage3_total);
  EXPECT_EQ(s3.history.size(), cfg.stage3_steps);
  cfg.stage3_total = 100000;
  EXPECT_THROW(run_stage3_adapt(cfg, corpus, s1), Error);
}

TEST(EpochSampler, CoversEveryIndexPerEpoch) {
  EpochSampler s(7, 3);
  for (int epoch = 0; epoch < 5; ++epoch) {
    auto b = s.next(7);
    std::sort(b.begin(), b.end());
    for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(b[i], i);
  }
  EXPECT_THROW(EpochSampler(0, 1), Error);
}

TEST(TrainConfig, ValidationAndHash) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  TrainConfig d = c;
  d.k = 1;
  EXPECT_THROW(d.validate(), Error);
  d = c;
  d.mixture = {0.5, 0.5, 0.5};
  EXPECT_THROW(d.validate(), Error);
  d = c;
  d.penalty.lambda = -1.0;
  EXPECT_THROW(d.validate(), Error);
  d = c;
  d.grpo_lr = 0.25;
  EXPECT_NE(c.hash(), d.hash());
  EXPECT_EQ(c.hash(), TrainConfig{}.hash());
}
