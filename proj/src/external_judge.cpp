#include "culcap/external_judge.hpp"

#include <exception>
#include <optional>
#include <thread>

#include "json.hpp"

namespace culcap {

using nlohmann::json;

namespace {

json parse_object(std::string_view body, std::string_view task_id) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    throw JudgeProtocolError("response is not valid JSON");
  }
  if (!j.is_object()) throw JudgeProtocolError("response is not a JSON object");
  if (j.contains("task_id") &&
      (!j["task_id"].is_string() || j["task_id"].get<std::string>() != task_id)) {
    throw JudgeProtocolError("response task_id does not match the request");
  }
  return j;
}

std::string task_id_for(std::string_view mode, const json& request) {
  return std::string(mode) + "-" + hex64(fnv1a(request.dump()));
}

json candidate_array(const Vocabulary& vocab, std::span<const TokenSeq> texts) {
  json arr = json::array();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    arr.push_back({{"id", i}, {"text", vocab.render(texts[i])}});
  }
  return arr;
}

json descriptor_json(const Vocabulary& vocab, const ImageRecord& image) {
  json arr = json::array();
  for (TokenId t : image.descriptor_tokens) arr.push_back(vocab.token(t));
  return arr;
}

}  // namespace

std::vector<std::size_t> parse_ranking_response(std::string_view body, std::size_t n,
                                                std::string_view task_id) {
  json j = parse_object(body, task_id);
  if (!j.contains("ranking") || !j["ranking"].is_array()) {
    throw JudgeProtocolError("response lacks a ranking array");
  }
  std::vector<std::size_t> ranking;
  for (const auto& v : j["ranking"]) {
    if (!v.is_number_integer()) throw JudgeProtocolError("ranking entry is not an integer");
    const auto x = v.get<long long>();
    if (x < 0 || static_cast<unsigned long long>(x) >= n) {
      throw JudgeProtocolError("ranking id " + std::to_string(x) + " out of range");
    }
    ranking.push_back(static_cast<std::size_t>(x));
  }
  if (!is_permutation_of_range(ranking, n)) {
    throw JudgeProtocolError("ranking is not a permutation of 0.." + std::to_string(n - 1));
  }
  return ranking;
}

std::size_t parse_choice_response(std::string_view body, std::string_view task_id) {
  json j = parse_object(body, task_id);
  if (!j.contains("choice") || !j["choice"].is_number_integer()) {
    throw JudgeProtocolError("response lacks an integer choice");
  }
  const auto c = j["choice"].get<long long>();
  if (c != 0 && c != 1) throw JudgeProtocolError("choice must be 0 or 1");
  return static_cast<std::size_t>(c);
}

DimensionScore parse_scores_response(std::string_view body, std::string_view id,
                                     std::string_view task_id) {
  json j = parse_object(body, task_id);
  if (!j.contains("scores") || !j["scores"].is_object()) {
    throw JudgeProtocolError("response lacks a scores object");
  }
  const std::string key(id);
  if (!j["scores"].contains(key) || !j["scores"][key].is_object()) {
    throw JudgeProtocolError("scores missing candidate " + key);
  }
  const json& s = j["scores"][key];
  DimensionScore out;
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    const std::string dim(kDimensionKeys[d]);
    if (!s.contains(dim) || !s[dim].is_number()) {
      throw JudgeProtocolError("score for " + dim + " missing or not a number");
    }
    const double v = s[dim].get<double>();
    if (!(v >= 0.0 && v <= 10.0)) {
      throw JudgeProtocolError("score for " + dim + " outside [0, 10]");
    }
    out[d] = v;
  }
  return out;
}

ExternalJudge::ExternalJudge(Lexicon lexicon, ExternalJudgeConfig config, PostFn post)
    : lexicon_(std::move(lexicon)), config_(std::move(config)), post_(std::move(post)) {
  if (!post_) throw Error(ErrorCode::kConfig, "external judge needs a transport");
  if (config_.max_in_flight == 0) config_.max_in_flight = 1;
  if (config_.retries < 0) config_.retries = 0;
}

std::string ExternalJudge::send(const std::string& body) {
  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    ++requests_sent_;
    try {
      return post_(body);
    } catch (const TransportFailure& e) {
      last_error = e.what();
    }
  }
  throw JudgeUnavailable("judge unreachable after " + std::to_string(config_.retries + 1) +
                         " attempts: " + last_error);
}

template <typename Result>
Result ExternalJudge::round_trip(
    const std::function<std::string(const std::string&)>& build,
    const std::function<Result(const std::string&)>& parse) {
  std::string first_error;
  try {
    return parse(send(build("")));
  } catch (const JudgeProtocolError& e) {
    first_error = e.what();
  }
  try {
    return parse(send(build(first_error)));
  } catch (const JudgeProtocolError& e) {
    throw JudgeProtocolError("malformed judge response after one repair retry: " +
                             std::string(e.what()));
  }
}

JudgeRanking ExternalJudge::rank(const CandidateSet& set) {
  if (set.size() < 3) {
    throw Error(ErrorCode::kInvalidArgument, "ranking needs at least 3 candidates");
  }
  const Vocabulary& vocab = lexicon_.vocab;
  std::vector<TokenSeq> presented;
  for (std::size_t canonical : set.presentation_order) {
    auto c = set.candidate(canonical, vocab.eos());
    presented.emplace_back(c.begin(), c.end());
  }
  json request;
  request["image_descriptor"] = descriptor_json(vocab, set.image);
  request["context"] = std::string(to_string(set.context));
  request["candidates"] = candidate_array(vocab, presented);
  request["rubric"] =
      build_rubric_prompt(lexicon_, set.image, set.context, presented, JudgeMode::kRanking);
  request["mode"] = "ranking";
  const std::string task_id = task_id_for("ranking", request);
  request["task_id"] = task_id;

  const auto positions = round_trip<std::vector<std::size_t>>(
      [&](const std::string& repair) {
        json r = request;
        if (!repair.empty()) r["repair"] = "Previous reply rejected (" + repair + ").";
        return r.dump();
      },
      [&](const std::string& body) {
        return parse_ranking_response(body, set.size(), task_id);
      });
  JudgeRanking out;
  for (std::size_t pos : positions) out.ranking.push_back(set.presentation_order[pos]);
  return out;
}

std::vector<JudgeRanking> ExternalJudge::rank_many(std::span<const CandidateSet> sets) {
  const std::size_t n = sets.size();
  std::vector<std::optional<JudgeRanking>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = rank(sets[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::min(config_.max_in_flight, n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  std::vector<JudgeRanking> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*results[i]));
  }
  return out;
}

PairwiseVerdict ExternalJudge::compare(const ImageRecord& image, CultureContext context,
                                       std::span<const TokenId> caption_a,
                                       std::span<const TokenId> caption_b,
                                       std::uint64_t seed) {
  const Vocabulary& vocab = lexicon_.vocab;
  Rng rng(seed);
  const bool swapped = uniform01(rng) < 0.5;
  const auto a = caption_body(caption_a, vocab.eos());
  const auto b = caption_body(caption_b, vocab.eos());
  std::vector<TokenSeq> shown = {TokenSeq(a.begin(), a.end()), TokenSeq(b.begin(), b.end())};
  if (swapped) std::swap(shown[0], shown[1]);

  json request;
  request["image_descriptor"] = descriptor_json(vocab, image);
  request["context"] = std::string(to_string(context));
  request["candidates"] = candidate_array(vocab, shown);
  request["rubric"] = build_rubric_prompt(lexicon_, image, context, shown, JudgeMode::kPairwise);
  request["mode"] = "pairwise";
  const std::string task_id = task_id_for("pairwise", request);
  request["task_id"] = task_id;

  std::string raw;
  const std::size_t shown_choice = round_trip<std::size_t>(
      [&](const std::string& repair) {
        json r = request;
        if (!repair.empty()) r["repair"] = "Previous reply rejected (" + repair + ").";
        return r.dump();
      },
      [&](const std::string& body) {
        std::size_t c = parse_choice_response(body, task_id);
        raw = body;
        return c;
      });
  PairwiseVerdict v;
  const std::size_t original = swapped ? 1 - shown_choice : shown_choice;
  v.chosen = original == 0 ? PairwiseVerdict::Choice::kFirst : PairwiseVerdict::Choice::kSecond;
  v.raw_response = raw;
  return v;
}

DimensionScore ExternalJudge::score(const ImageRecord& image, CultureContext context,
                                    std::span<const TokenId> caption,
                                    std::span<const TokenId> /*reference*/) {
  const Vocabulary& vocab = lexicon_.vocab;
  const auto body = caption_body(caption, vocab.eos());
  std::vector<TokenSeq> shown = {TokenSeq(body.begin(), body.end())};
  json request;
  request["image_descriptor"] = descriptor_json(vocab, image);
  request["context"] = std::string(to_string(context));
  request["candidates"] = candidate_array(vocab, shown);
  request["rubric"] = build_rubric_prompt(lexicon_, image, context, shown, JudgeMode::kAbsolute);
  request["mode"] = "absolute";
  const std::string task_id = task_id_for("absolute", request);
  request["task_id"] = task_id;
  return round_trip<DimensionScore>(
      [&](const std::string& repair) {
        json r = request;
        if (!repair.empty()) r["repair"] = "Previous reply rejected (" + repair + ").";
        return r.dump();
      },
      [&](const std::string& resp) { return parse_scores_response(resp, "0", task_id); });
}

}  // namespace culcap
