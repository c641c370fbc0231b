#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "culcap/embedding.hpp"
#include "culcap/external_judge.hpp"
#include "culcap/trainer.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace culcap;
using nlohmann::json;
using culcap::oracle::ranking_body;

namespace {

// Scripted transport: answers each request with f(request json).
struct FakeEndpoint {
  std::function<std::string(const json&)> reply;
  std::vector<json> requests;
  std::mutex mu;

  PostFn fn() {
    return [this](const std::string& body) {
      json req = json::parse(body);
      {
        std::lock_guard<std::mutex> lock(mu);
        requests.push_back(req);
      }
      return reply(req);
    };
  }
};

CandidateSet some_set(const Corpus& corpus, std::uint64_t seed, std::size_t k = 4) {
  const ImageRecord& img = corpus.images[seed % corpus.images.size()];
  PolicyParams p = PolicyParams::zeros(corpus.lexicon.vocab, 6);
  auto rollouts = sample_rollouts(p, Condition{img.descriptor_tokens, CultureContext::kWestern}, k, 1.0, seed);
  CaptionRecord ref;
  ref.image_id = img.image_id;
  ref.context = CultureContext::kWestern;
  ref.text = img.descriptor_tokens;
  return make_candidate_set(img, CultureContext::kWestern, rollouts, ref, seed + 100);
}

}  // namespace

TEST(ExternalJudge, MalformedRankingsFailAfterExactlyOneRepair) {
  Corpus corpus = culcap::testing::small_corpus(2);
  auto corpus_of_errors = oracle::malformed_rankings();
  ASSERT_EQ(corpus_of_errors.size(), 20u);
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < corpus_of_errors.size(); ++i) {
    FakeEndpoint ep;
    ep.reply = corpus_of_errors[i];
    ExternalJudge judge(corpus.lexicon, {}, ep.fn());
    try {
      judge.rank(some_set(corpus, i));
      ADD_FAILURE() << "case " << i << " accepted";
    } catch (const JudgeProtocolError&) {
      ++rejected;
    }
    ASSERT_EQ(ep.requests.size(), 2u) << "case " << i;
    EXPECT_FALSE(ep.requests[0].contains("repair"));
    EXPECT_TRUE(ep.requests[1].contains("repair"));
    EXPECT_EQ(ep.requests[0]["task_id"], ep.requests[1]["task_id"]);
  }
  EXPECT_EQ(rejected, 20u);
}

TEST(ExternalJudge, RepairedResponseIsAccepted) {
  Corpus corpus = culcap::testing::small_corpus(2);
  FakeEndpoint ep;
  ep.reply = [](const json& q) {
    if (!q.contains("repair")) return ranking_body(q, {0, 0, 1, 2, 3});
    return ranking_body(q, {4, 3, 2, 1, 0});
  };
  ExternalJudge judge(corpus.lexicon, {}, ep.fn());
  CandidateSet set = some_set(corpus, 1);
  auto r = judge.rank(set);
  EXPECT_EQ(ep.requests.size(), 2u);
  ASSERT_TRUE(is_permutation_of_range(r.ranking, 5));
  // Replies name presented positions; the result is canonical.
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(r.ranking[i], set.presentation_order[4 - i]);
}

TEST(ExternalJudge, RequestCarriesRubricAndPresentedCandidates) {
  Corpus corpus = culcap::testing::small_corpus(2);
  FakeEndpoint ep;
  ep.reply = [](const json& q) { return ranking_body(q, {0, 1, 2, 3, 4}); };
  ExternalJudge judge(corpus.lexicon, {}, ep.fn());
  CandidateSet set = some_set(corpus, 2);
  judge.rank(set);
  const json& q = ep.requests.at(0);
  EXPECT_EQ(q["mode"], "ranking");
  EXPECT_EQ(q["context"], "western");
  ASSERT_EQ(q["candidates"].size(), 5u);
  const auto& vocab = corpus.lexicon.vocab;
  for (std::size_t p = 0; p < 5; ++p) {
    EXPECT_EQ(q["candidates"][p]["id"], p);
    EXPECT_EQ(q["candidates"][p]["text"], vocab.render(set.candidate(set.presentation_order[p], vocab.eos())));
  }
  EXPECT_TRUE(q["rubric"].is_string());
}

TEST(ExternalJudge, TransportFailuresBecomeJudgeUnavailable) {
  Corpus corpus = culcap::testing::small_corpus(2);
  std::atomic<int> calls{0};
  PostFn down = [&](const std::string&) -> std::string {
    ++calls;
    throw TransportFailure("connection refused");
  };
  ExternalJudgeConfig cfg;
  cfg.retries = 2;
  ExternalJudge judge(corpus.lexicon, cfg, down);
  EXPECT_THROW(judge.rank(some_set(corpus, 3)), JudgeUnavailable);
  EXPECT_EQ(calls.load(), 3);
}

TEST(ExternalJudge, RankManyKeepsInputOrderUnderConcurrency) {
  Corpus corpus = culcap::testing::small_corpus(2);
  FakeEndpoint ep;
  std::atomic<int> in_flight{0}, peak{0};
  ep.reply = [&](const json& q) {
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    --in_flight;
    // Best first = presented order, so canonical = presentation order.
    return ranking_body(q, {0, 1, 2, 3, 4});
  };
  ExternalJudgeConfig cfg;
  cfg.max_in_flight = 3;
  ExternalJudge judge(corpus.lexicon, cfg, ep.fn());
  std::vector<CandidateSet> sets;
  for (std::uint64_t s = 0; s < 12; ++s) sets.push_back(some_set(corpus, s));
  auto out = judge.rank_many(sets);
  ASSERT_EQ(out.size(), sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) EXPECT_EQ(out[i].ranking, sets[i].presentation_order);
  EXPECT_LE(peak.load(), 3);
}

TEST(ExternalJudge, PairwiseVerdictIsDerandomised) {
  Corpus corpus = culcap::testing::small_corpus(2);
  const ImageRecord& img = corpus.images[0];
  TokenSeq a = img.descriptor_tokens;
  TokenSeq b = {corpus.lexicon.western_markers[0]};
  const std::string a_text = corpus.lexicon.vocab.render(a);
  FakeEndpoint ep;
  // Always prefers whichever shown slot holds caption a.
  ep.reply = [&](const json& q) {
    const int slot = q["candidates"][0]["text"] == a_text ? 0 : 1;
    return json{{"task_id", q["task_id"]}, {"choice", slot}}.dump();
  };
  ExternalJudge judge(corpus.lexicon, {}, ep.fn());
  int swapped = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    EXPECT_EQ(judge.compare(img, CultureContext::kWestern, a, b, seed).chosen,
              PairwiseVerdict::Choice::kFirst);
    EXPECT_EQ(judge.compare(img, CultureContext::kWestern, b, a, seed).chosen,
              PairwiseVerdict::Choice::kSecond);
    swapped += ep.requests.back()["candidates"][0]["text"] != corpus.lexicon.vocab.render(b);
  }
  EXPECT_GT(swapped, 5);
  EXPECT_LT(swapped, 35);
}

TEST(ExternalJudge, ChoiceAndScoreValidation) {
  EXPECT_THROW(parse_choice_response(R"({"choice": 2})", "t"), JudgeProtocolError);
  EXPECT_THROW(parse_choice_response(R"({"choice": "first"})", "t"), JudgeProtocolError);
  EXPECT_EQ(parse_choice_response(R"({"choice": 1})", "t"), 1u);
  const char* ok = R"({"scores": {"0": {"ir": 1, "cf": 2, "sr": 3, "ra": 4, "hu": 5, "cr": 6}}})";
  auto s = parse_scores_response(ok, "0", "t");
  EXPECT_EQ(s.ir, 1.0);
  EXPECT_EQ(s.cr, 6.0);
  const char* high = R"({"scores": {"0": {"ir": 11, "cf": 2, "sr": 3, "ra": 4, "hu": 5, "cr": 6}}})";
  EXPECT_THROW(parse_scores_response(high, "0", "t"), JudgeProtocolError);
  const char* missing = R"({"scores": {"0": {"ir": 1, "cf": 2, "sr": 3, "ra": 4, "hu": 5}}})";
  EXPECT_THROW(parse_scores_response(missing, "0", "t"), JudgeProtocolError);
}

TEST(ExternalJudge, MalformedRankingNeverReachesTheUpdate) {
  Corpus corpus = culcap::testing::small_corpus(2);
  FakeEndpoint ep;
  ep.reply = [](const json& q) { return ranking_body(q, {0, 0, 0, 0, 0, 0, 0, 0, 0}); };
  ExternalJudge judge(corpus.lexicon, {}, ep.fn());
  HashedNgramEncoder enc(corpus.lexicon.vocab);
  TrainConfig cfg;
  StageState state = StageState::initial(corpus, cfg);
  const PolicyParams before = state.params;
  PrototypeMap protos;
  GrpoEnv env{corpus.lexicon, judge, enc, protos, before};
  auto samples = stage2_samples(corpus);
  std::vector<GrpoSample> batch(samples.begin(), samples.begin() + 2);
  EXPECT_THROW(grpo_step(state, batch, env, cfg, 1), JudgeProtocolError);
  EXPECT_EQ(state.params, before);
  EXPECT_TRUE(state.history.empty());
}

// Loopback HTTP server speaking the wire protocol.
TEST(ExternalJudge, TalksToARealHttpServer) {
  Corpus corpus = culcap::testing::small_corpus(2);
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string auth;
  server.Post("/judge", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    auth = req.get_header_value("Authorization");
    json q = json::parse(req.body);
    json ranking = json::array();
    for (std::size_t i = q["candidates"].size(); i-- > 0;) ranking.push_back(i);
    res.set_content(ranking_body(q, ranking), "application/json");
  });
  server.Post("/down", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  ExternalJudge judge(corpus.lexicon, {}, make_http_post(base + "/judge", 2000, "k123"));
  CandidateSet set = some_set(corpus, 5);
  auto r = judge.rank(set);
  EXPECT_EQ(hits.load(), 1);
  EXPECT_EQ(auth, "Bearer k123");
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(r.ranking[i], set.presentation_order[4 - i]);

  ExternalJudgeConfig cfg;
  cfg.retries = 1;
  ExternalJudge broken(corpus.lexicon, cfg, make_http_post(base + "/down", 2000, ""));
  EXPECT_THROW(broken.rank(set), JudgeUnavailable);

  server.stop();
  t.join();
}

TEST(HttpTransport, EndpointParsing) {
  auto ep = parse_endpoint("http://localhost:8080/v1/judge");
  EXPECT_EQ(ep.origin, "http://localhost:8080");
  EXPECT_EQ(ep.path, "/v1/judge");
  EXPECT_EQ(parse_endpoint("https://example.org").path, "/");
  EXPECT_THROW(parse_endpoint("localhost/judge"), Error);
}

TEST(ExternalEncoder, NormalisesAndValidates) {
  Corpus corpus = culcap::testing::small_corpus(2);
  FakeEndpoint ep;
  ep.reply = [](const json& q) {
    json vecs = json::array();
    for (std::size_t i = 0; i < q["texts"].size(); ++i) vecs.push_back({3.0, 4.0, 0.0});
    return json{{"vectors", vecs}}.dump();
  };
  ExternalEncoder enc(corpus.lexicon.vocab, 3, ep.fn());
  auto e = enc.embed(corpus.images[0].descriptor_tokens);
  EXPECT_NEAR(e[0], 0.6, 1e-12);
  EXPECT_NEAR(e[1], 0.8, 1e-12);

  ExternalEncoder wrong_dim(corpus.lexicon.vocab, 4, ep.fn());
  EXPECT_THROW(wrong_dim.embed(corpus.images[0].descriptor_tokens), EmbeddingUnavailable);

  PostFn down = [](const std::string&) -> std::string { throw TransportFailure("x"); };
  ExternalEncoder unreachable(corpus.lexicon.vocab, 3, down);
  EXPECT_THROW(unreachable.embed(corpus.images[0].descriptor_tokens), EmbeddingUnavailable);
}
