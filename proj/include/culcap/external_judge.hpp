#pragma once

#include <atomic>
#include <functional>
#include <string>

#include "culcap/http_transport.hpp"
#include "culcap/judge.hpp"

namespace culcap {

struct ExternalJudgeConfig {
  std::string endpoint;
  int timeout_ms = 30000;
  // Extra attempts after a transport failure, before JudgeUnavailable.
  int retries = 1;
  std::size_t max_in_flight = 4;
};

// Response validators. Each throws JudgeProtocolError with the reason.
std::vector<std::size_t> parse_ranking_response(std::string_view body, std::size_t n,
                                                std::string_view task_id);
std::size_t parse_choice_response(std::string_view body, std::string_view task_id);
DimensionScore parse_scores_response(std::string_view body, std::string_view id,
                                     std::string_view task_id);

// LLM judge behind the JSON wire protocol. A malformed response gets exactly
// one repair request; a second malformed response is a JudgeProtocolError.
class ExternalJudge : public JudgeBackend {
 public:
  ExternalJudge(Lexicon lexicon, ExternalJudgeConfig config, PostFn post);

  std::string name() const override { return "external"; }
  JudgeRanking rank(const CandidateSet& set) override;
  std::vector<JudgeRanking> rank_many(std::span<const CandidateSet> sets) override;
  PairwiseVerdict compare(const ImageRecord& image, CultureContext context,
                          std::span<const TokenId> caption_a,
                          std::span<const TokenId> caption_b,
                          std::uint64_t seed) override;
  DimensionScore score(const ImageRecord& image, CultureContext context,
                       std::span<const TokenId> caption,
                       std::span<const TokenId> reference) override;

  std::size_t requests_sent() const { return requests_sent_.load(); }

 private:
  std::string send(const std::string& body);
  // build(repair_note) returns the request body ("" = first attempt).
  template <typename Result>
  Result round_trip(const std::function<std::string(const std::string&)>& build,
                    const std::function<Result(const std::string&)>& parse);

  Lexicon lexicon_;
  ExternalJudgeConfig config_;
  PostFn post_;
  std::atomic<std::size_t> requests_sent_{0};
};

}  // namespace culcap
