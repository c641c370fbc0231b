#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "culcap/checkpoint.hpp"
#include "culcap/corpus.hpp"
#include "culcap/judge.hpp"
#include "culcap/scores.hpp"

namespace culcap {

enum class ScoreSource { kJudge, kHuman };
std::string_view to_string(ScoreSource source);

struct SampleEvaluation {
  std::string image_id;
  CultureContext context = CultureContext::kNone;
  TokenSeq caption;
  DimensionScore scores;
  ScoreSource source = ScoreSource::kJudge;
  std::string annotator;  // human records only

  // "image_id/context"; one hybrid-protocol sample.
  std::string key() const;
};

// Throws kEmptySequence on an empty caption body.
DimensionScore score_sample(JudgeBackend& judge, const Lexicon& lexicon,
                            const ImageRecord& image, CultureContext context,
                            std::span<const TokenId> caption,
                            std::span<const TokenId> reference = {});

struct EvalConfig {
  std::uint64_t seed = 1;
  std::size_t samples_per_image = 16;
  double temperature = 1.0;
};

// Samples captions under `generate` and scores them under `target` against the
// target-culture reference (if any). Each record holds the mean over samples
// and the first sampled caption. Generation seeds depend only on the image
// position, so different params and contexts share random numbers.
std::vector<SampleEvaluation> evaluate_policy(const PolicyParams& params, const Corpus& corpus,
                                              std::span<const std::string> image_ids,
                                              CultureContext generate, CultureContext target,
                                              JudgeBackend& judge, const EvalConfig& config);

DimensionScore mean_scores(std::span<const SampleEvaluation> evals);

struct AggregateReport {
  DimensionScore mean;
  double overall = 0.0;
  std::size_t human_samples = 0;
  std::size_t judge_samples = 0;
  std::size_t records = 0;
};

// round(n * fraction) keys, chosen by seeded shuffle; returned sorted.
std::set<std::string> select_human_subset(std::vector<std::string> keys, double fraction,
                                          std::uint64_t seed);

// Union mean over samples. Samples in the seeded human subset must be scored
// only by humans (annotators averaged), all others only by the judge;
// anything else is kSourceConflict.
AggregateReport aggregate_hybrid(std::span<const SampleEvaluation> evals, double human_fraction,
                                 std::uint64_t seed);

// Judge records with the human subset replaced by the given human records.
std::vector<SampleEvaluation> merge_hybrid(std::span<const SampleEvaluation> judge_evals,
                                           std::span<const SampleEvaluation> human_evals,
                                           double human_fraction, std::uint64_t seed);

// image_id,context,ir,cf,sr,ra,hu,cr,annotator
std::vector<SampleEvaluation> import_human_scores(const std::string& path, const Corpus& corpus);
std::vector<SampleEvaluation> parse_human_scores(std::string_view text, const Corpus& corpus,
                                                 const std::string& origin = "<csv>");

// kBenchmarkLeak if any trained image is a benchmark image.
void check_benchmark_hygiene(std::span<const std::string> trained_images,
                             const DatasetSplit& split);
// Image ids named in a transcript's step records.
std::vector<std::string> transcript_images(std::string_view transcript_jsonl);

struct ContextCell {
  CultureContext condition = CultureContext::kNone;
  DimensionScore scores;  // for "none": mean over both target cultures
  std::map<CultureContext, DimensionScore> per_target;
};

struct ContextComparison {
  std::uint64_t seed = 0;
  std::size_t images = 0;
  std::vector<ContextCell> cells;  // none, western, eastern

  const ContextCell& cell(CultureContext condition) const;
};

ContextComparison compare_contexts(const CheckpointRecord& checkpoint, const Corpus& corpus,
                                   JudgeBackend& judge, const EvalConfig& config);

// Benchmark scores of one model under each culture's matching context.
struct CultureScores {
  DimensionScore western;
  DimensionScore eastern;
  double mean_cf() const { return 0.5 * (western.cf + eastern.cf); }
};

CultureScores evaluate_benchmark(const PolicyParams& params, const Corpus& corpus,
                                 JudgeBackend& judge, const EvalConfig& config);

enum class Difficulty { kEasy, kHard };
std::string_view to_string(Difficulty d);

struct JudgeValidationPair {
  std::string image_id;
  CultureContext context = CultureContext::kNone;
  TokenSeq first;
  TokenSeq second;
  Difficulty difficulty = Difficulty::kEasy;
  PairwiseVerdict::Choice gold = PairwiseVerdict::Choice::kFirst;

  const TokenSeq& high() const {
    return gold == PairwiseVerdict::Choice::kFirst ? first : second;
  }
  const TokenSeq& low() const {
    return gold == PairwiseVerdict::Choice::kFirst ? second : first;
  }
};

struct LowQualityCaption {
  std::string image_id;
  CultureContext context = CultureContext::kWestern;
  TokenSeq caption;
};

// Low captions scoring below their reference (simulated, no anchor) are
// sorted by total; easy pairs draw from the bottom third, hard pairs from the
// top third. The reference goes in a seeded slot.
std::vector<JudgeValidationPair> build_validation_pairs(
    const Corpus& corpus, std::span<const LowQualityCaption> pool, std::size_t easy,
    std::size_t hard, std::uint64_t seed);

// Captions sampled from `params` on benchmark images under both cultures.
std::vector<LowQualityCaption> sample_low_quality_pool(const PolicyParams& params,
                                                       const Corpus& corpus,
                                                       std::size_t per_image, double temperature,
                                                       std::uint64_t seed);

std::vector<PairwiseVerdict> judge_pairs(std::span<const JudgeValidationPair> pairs,
                                         const Corpus& corpus, JudgeBackend& judge,
                                         std::uint64_t seed);

struct AgreementCell {
  std::size_t correct = 0;
  std::size_t total = 0;
  double rate() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

struct AgreementReport {
  std::string judge;
  std::map<std::pair<std::string, Difficulty>, AgreementCell> by_language;
  AgreementCell easy;
  AgreementCell hard;
  AgreementCell overall;
};

// kMissingVerdict when the counts differ.
AgreementReport agreement_rate(std::span<const JudgeValidationPair> pairs,
                               std::span<const PairwiseVerdict> verdicts,
                               const std::string& judge_name = "");

// Reports. JSON carries the seed; text is an aligned table.
std::string report_json(const AggregateReport& report, std::uint64_t seed,
                        const std::string& language);
std::string report_text(const AggregateReport& report, std::uint64_t seed,
                        const std::string& language);
std::string report_json(const ContextComparison& table);
std::string report_text(const ContextComparison& table);
std::string report_json(const AgreementReport& report, std::uint64_t seed);
std::string report_text(const AgreementReport& report, std::uint64_t seed);

}  // namespace culcap
