#include "culcap/judge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace culcap {

void SimJudgeWeights::validate() const {
  bool any_positive = false;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw Error(ErrorCode::kInvalidArgument, "judge weights must be finite and >= 0");
    }
    any_positive = any_positive || x > 0.0;
  }
  if (!any_positive) {
    throw Error(ErrorCode::kInvalidArgument, "at least one judge weight must be positive");
  }
}

SimScore simulated_score(const Lexicon& lexicon, const ImageRecord& image,
                         CultureContext context, std::span<const TokenId> caption,
                         const SimJudgeWeights& weights,
                         std::span<const TokenId> reference) {
  const Vocabulary& vocab = lexicon.vocab;
  for (TokenId t : caption) {
    if (!vocab.contains(t)) {
      throw Error(ErrorCode::kUnknownToken, "caption token id " + std::to_string(t) +
                                                " not in vocabulary");
    }
  }
  const auto body = caption_body(caption, vocab.eos());
  const auto ref = caption_body(reference, vocab.eos());
  const auto& desc = image.descriptor_tokens;
  SimScore out;
  DimensionScore& s = out.scores;
  const std::size_t n = body.size();
  if (n == 0) return out;

  const std::set<TokenId> cap_set(body.begin(), body.end());
  const std::set<TokenId> desc_set(desc.begin(), desc.end());

  std::size_t overlap = 0;
  for (TokenId t : cap_set) overlap += desc_set.count(t);
  const std::size_t denom = std::min(n, desc.size());
  s.ir = denom == 0 ? 0.0 : 10.0 * static_cast<double>(overlap) / static_cast<double>(denom);

  if (context == CultureContext::kNone) {
    s.cf = 5.0;
  } else {
    std::size_t markers = 0;
    for (TokenId t : body) markers += lexicon.is_marker(t, context) ? 1 : 0;
    s.cf = 10.0 * std::min(1.0, static_cast<double>(markers) / 2.0);
  }

  s.sr = 10.0 * static_cast<double>(cap_set.size()) / static_cast<double>(n);

  if (n < 2) {
    s.ra = 10.0;
  } else {
    std::set<std::pair<TokenId, TokenId>> bigrams;
    for (std::size_t i = 0; i + 1 < n; ++i) bigrams.emplace(body[i], body[i + 1]);
    const double total_bigrams = static_cast<double>(n - 1);
    const double repeated = total_bigrams - static_cast<double>(bigrams.size());
    s.ra = 10.0 * (1.0 - repeated / total_bigrams);
  }

  s.hu = 2.0;
  if (desc.size() >= 2) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (body[i] == desc[0] && body[i + 1] == desc[1]) {
        s.hu = 10.0;
        break;
      }
    }
  }

  if (ref.empty()) {
    s.cr = 5.0;
  } else {
    const std::set<TokenId> ref_set(ref.begin(), ref.end());
    std::size_t inter = 0;
    for (TokenId t : cap_set) inter += ref_set.count(t);
    const std::size_t uni = cap_set.size() + ref_set.size() - inter;
    s.cr = 10.0 * (1.0 - static_cast<double>(inter) / static_cast<double>(uni));
  }

  for (std::size_t d = 0; d < kNumDimensions; ++d) out.total += weights.w[d] * s[d];
  return out;
}

std::size_t CandidateSet::reference_position() const {
  for (std::size_t p = 0; p < presentation_order.size(); ++p) {
    if (presentation_order[p] == reference_index()) return p;
  }
  throw Error(ErrorCode::kInvalidArgument, "presentation order lacks the reference");
}

std::span<const TokenId> CandidateSet::candidate(std::size_t canonical, TokenId eos) const {
  if (canonical == reference_index()) return reference.text;
  return caption_body(rollouts.at(canonical).tokens, eos);
}

CandidateSet make_candidate_set(const ImageRecord& image, CultureContext context,
                                std::vector<SequenceSample> rollouts,
                                const CaptionRecord& reference, std::uint64_t seed) {
  CandidateSet set;
  set.image = image;
  set.context = context;
  set.rollouts = std::move(rollouts);
  set.reference = reference;
  set.presentation_order.resize(set.size());
  std::iota(set.presentation_order.begin(), set.presentation_order.end(), 0);
  Rng rng(seed);
  seeded_shuffle(set.presentation_order, rng);
  return set;
}

std::size_t JudgeRanking::rank_of(std::size_t canonical) const {
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    if (ranking[r] == canonical) return r + 1;
  }
  throw Error(ErrorCode::kRangeError,
              "candidate " + std::to_string(canonical) + " missing from ranking");
}

bool is_permutation_of_range(std::span<const std::size_t> values, std::size_t n) {
  if (values.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (std::size_t v : values) {
    if (v >= n || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

std::vector<std::size_t> rank_by_totals(std::span<const double> totals) {
  std::vector<std::size_t> order(totals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return totals[a] > totals[b];
  });
  return order;
}

std::string_view to_string(JudgeMode mode) {
  switch (mode) {
    case JudgeMode::kRanking: return "ranking";
    case JudgeMode::kPairwise: return "pairwise";
    case JudgeMode::kAbsolute: return "absolute";
  }
  return "ranking";
}

std::string build_rubric_prompt(const Lexicon& lexicon, const ImageRecord& image,
                                CultureContext context,
                                std::span<const TokenSeq> candidates, JudgeMode mode) {
  if (candidates.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "prompt needs at least one candidate");
  }
  const Vocabulary& vocab = lexicon.vocab;
  std::ostringstream p;
  p << "You are evaluating short humorous captions written for an image under a "
       "target cultural context.\n";
  p << "Response language: " << language_tag(context) << "\n\n";

  p << "Image content: " << vocab.render(image.descriptor_tokens) << "\n";
  switch (context) {
    case CultureContext::kWestern:
      p << "Cultural condition: the caption must read as humor rooted in the Western "
           "cultural context, using its associations and expressive logic.\n";
      break;
    case CultureContext::kEastern:
      p << "Cultural condition: the caption must read as humor rooted in the Eastern "
           "cultural context, using its associations and expressive logic.\n";
      break;
    case CultureContext::kNone:
      p << "Cultural condition: none specified; judge contextual fit against general "
           "audiences.\n";
      break;
  }

  p << "\nScore each dimension from 0 to 10:\n"
       "- IR (Image Relevance): the caption is anchored in what the image shows.\n"
       "- CF (Contextual Fit): the caption follows the associations and expressive "
       "logic of the target cultural context.\n"
       "- SR (Semantic Richness): the caption adds meaning or interpretive room beyond "
       "a literal description.\n"
       "- Ra (Reasonableness): the caption is natural, coherent and consistent with "
       "common sense.\n"
       "- Hu (Humor): the caption produces a perceptible humorous effect.\n"
       "- Cr (Creativity): the idea or wording is novel rather than templated.\n";

  p << "\nScore bands:\n"
       "- 0-2: extremely poor; severe distortion, obvious conflict or near-total "
       "failure on the dimension.\n"
       "- 3-5: relatively weak; only partially satisfied, with clear deficiencies.\n"
       "- 6-7: generally good; main requirements met, room left in completeness, "
       "detail or stability.\n"
       "- 8-10: strong; high completion quality with minor or negligible defects.\n";

  p << "\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    p << "[Candidate " << i << "]\n" << vocab.render(candidates[i]) << "\n";
  }
  p << "\n";
  switch (mode) {
    case JudgeMode::kRanking:
      p << "Rank all " << candidates.size()
        << " candidates jointly from best to worst over the six dimensions. Reply with "
           "only a JSON object {\"ranking\": [ids]} where ids is a permutation of 0.."
        << candidates.size() - 1 << ".\n";
      break;
    case JudgeMode::kPairwise:
      p << "Decide which candidate is better overall. Reply with only a JSON object "
           "{\"choice\": id} where id is 0 or 1.\n";
      break;
    case JudgeMode::kAbsolute:
      p << "Score every candidate. Reply with only a JSON object {\"scores\": {id: "
           "{\"ir\": x, \"cf\": x, \"sr\": x, \"ra\": x, \"hu\": x, \"cr\": x}}} with "
           "each x in [0, 10].\n";
      break;
  }
  return p.str();
}

std::vector<JudgeRanking> JudgeBackend::rank_many(std::span<const CandidateSet> sets) {
  std::vector<JudgeRanking> out;
  out.reserve(sets.size());
  for (const auto& s : sets) out.push_back(rank(s));
  return out;
}

SimulatedJudge::SimulatedJudge(Lexicon lexicon, SimJudgeWeights weights)
    : lexicon_(std::move(lexicon)), weights_(weights) {
  weights_.validate();
}

std::vector<double> SimulatedJudge::presented_totals(const CandidateSet& set) const {
  const TokenId eos = lexicon_.vocab.eos();
  std::vector<double> totals;
  totals.reserve(set.size());
  for (std::size_t canonical : set.presentation_order) {
    totals.push_back(simulated_score(lexicon_, set.image, set.context,
                                     set.candidate(canonical, eos), weights_,
                                     set.reference.text)
                         .total);
  }
  return totals;
}

JudgeRanking SimulatedJudge::rank(const CandidateSet& set) {
  if (set.size() < 3) {
    throw Error(ErrorCode::kInvalidArgument, "ranking needs at least 3 candidates");
  }
  const auto totals = presented_totals(set);
  JudgeRanking out;
  for (std::size_t pos : rank_by_totals(totals)) {
    out.ranking.push_back(set.presentation_order[pos]);
  }
  return out;
}

PairwiseVerdict SimulatedJudge::compare(const ImageRecord& image, CultureContext context,
                                        std::span<const TokenId> caption_a,
                                        std::span<const TokenId> caption_b,
                                        std::uint64_t /*seed*/) {
  const double a = simulated_score(lexicon_, image, context, caption_a, weights_).total;
  const double b = simulated_score(lexicon_, image, context, caption_b, weights_).total;
  PairwiseVerdict v;
  v.chosen = b > a ? PairwiseVerdict::Choice::kSecond : PairwiseVerdict::Choice::kFirst;
  v.raw_response = b > a ? "{\"choice\":1}" : "{\"choice\":0}";
  return v;
}

DimensionScore SimulatedJudge::score(const ImageRecord& image, CultureContext context,
                                     std::span<const TokenId> caption,
                                     std::span<const TokenId> reference) {
  return simulated_score(lexicon_, image, context, caption, weights_, reference).scores;
}

}  // namespace culcap
