#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "culcap/corpus.hpp"
#include "culcap/policy.hpp"
#include "culcap/scores.hpp"

namespace culcap {

struct SimJudgeWeights {
  std::array<double, kNumDimensions> w = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  // Throws kInvalidArgument unless all weights are >= 0 and one is > 0.
  void validate() const;
};

struct SimScore {
  DimensionScore scores;
  double total = 0.0;
};

// Deterministic rubric surrogate. `caption` may carry a trailing EOS. With an
// empty `reference`, creativity is fixed at 5. The punch bigram of an image is
// (descriptor[0], descriptor[1]).
SimScore simulated_score(const Lexicon& lexicon, const ImageRecord& image,
                         CultureContext context, std::span<const TokenId> caption,
                         const SimJudgeWeights& weights,
                         std::span<const TokenId> reference = {});

// K rollouts plus the reference. Canonical indices: 0..K-1 are rollouts in
// sampling order, K is the reference.
struct CandidateSet {
  ImageRecord image;
  CultureContext context = CultureContext::kNone;
  std::vector<SequenceSample> rollouts;
  CaptionRecord reference;
  // presentation_order[p] = canonical index shown at position p.
  std::vector<std::size_t> presentation_order;

  std::size_t size() const { return rollouts.size() + 1; }
  std::size_t reference_index() const { return rollouts.size(); }
  std::size_t reference_position() const;
  // Caption body (no EOS) of a canonical candidate.
  std::span<const TokenId> candidate(std::size_t canonical, TokenId eos) const;
};

CandidateSet make_candidate_set(const ImageRecord& image, CultureContext context,
                                std::vector<SequenceSample> rollouts,
                                const CaptionRecord& reference, std::uint64_t seed);

struct JudgeRanking {
  std::vector<std::size_t> ranking;  // canonical indices, best first

  // 1-based rank of a canonical candidate.
  std::size_t rank_of(std::size_t canonical) const;
};

bool is_permutation_of_range(std::span<const std::size_t> values, std::size_t n);

// Presented positions sorted by total descending; ties keep the earlier
// presented position first.
std::vector<std::size_t> rank_by_totals(std::span<const double> totals);

struct PairwiseVerdict {
  enum class Choice { kFirst, kSecond };
  Choice chosen = Choice::kFirst;
  std::string raw_response;
};

enum class JudgeMode { kRanking, kPairwise, kAbsolute };
std::string_view to_string(JudgeMode mode);

// Deterministic rubric prompt: six dimension definitions, the four score
// bands, the culture condition, numbered candidate blocks, and an output
// format instruction for `mode`. Candidates are never labelled by origin.
std::string build_rubric_prompt(const Lexicon& lexicon, const ImageRecord& image,
                                CultureContext context,
                                std::span<const TokenSeq> candidates, JudgeMode mode);

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual std::string name() const = 0;

  virtual JudgeRanking rank(const CandidateSet& set) = 0;
  // Results in input order.
  virtual std::vector<JudgeRanking> rank_many(std::span<const CandidateSet> sets);

  // `seed` drives presentation-order randomisation where the backend uses it.
  virtual PairwiseVerdict compare(const ImageRecord& image, CultureContext context,
                                  std::span<const TokenId> caption_a,
                                  std::span<const TokenId> caption_b,
                                  std::uint64_t seed) = 0;

  virtual DimensionScore score(const ImageRecord& image, CultureContext context,
                               std::span<const TokenId> caption,
                               std::span<const TokenId> reference) = 0;
};

class SimulatedJudge : public JudgeBackend {
 public:
  SimulatedJudge(Lexicon lexicon, SimJudgeWeights weights = {});

  std::string name() const override { return "simulated"; }
  JudgeRanking rank(const CandidateSet& set) override;
  PairwiseVerdict compare(const ImageRecord& image, CultureContext context,
                          std::span<const TokenId> caption_a,
                          std::span<const TokenId> caption_b,
                          std::uint64_t seed) override;
  DimensionScore score(const ImageRecord& image, CultureContext context,
                       std::span<const TokenId> caption,
                       std::span<const TokenId> reference) override;

  // Totals of the candidates in presented order.
  std::vector<double> presented_totals(const CandidateSet& set) const;
  const SimJudgeWeights& weights() const { return weights_; }
  const Lexicon& lexicon() const { return lexicon_; }

 private:
  Lexicon lexicon_;
  SimJudgeWeights weights_;
};

}  // namespace culcap
