#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"

#include "culcap/corpus.hpp"
#include "culcap/synth.hpp"
#include "fixtures.hpp"

using namespace culcap;
using culcap::testing::TempDir;

namespace {

std::vector<std::string> base_tokens(std::size_t n) {
  std::vector<std::string> t = {"<bos>", "<eos>"};
  for (std::size_t i = 2; i < n; ++i) t.push_back("t" + std::to_string(i));
  return t;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(Vocabulary, LookupIsInverse) {
  Vocabulary v(base_tokens(20));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    EXPECT_EQ(v.id(v.token(id)), id);
  }
  EXPECT_EQ(v.token(v.bos()), "<bos>");
  EXPECT_EQ(v.token(v.eos()), "<eos>");
}

TEST(Vocabulary, RejectsBadTokenLists) {
  EXPECT_EQ(code_of([] { Vocabulary v(base_tokens(10)); }), ErrorCode::kInvalidArgument);
  auto dup = base_tokens(20);
  dup[5] = dup[4];
  EXPECT_EQ(code_of([&] { Vocabulary v(dup); }), ErrorCode::kDuplicateId);
  auto no_eos = base_tokens(20);
  no_eos[1] = "x";
  EXPECT_EQ(code_of([&] { Vocabulary v(no_eos); }), ErrorCode::kInvalidArgument);
}

TEST(Vocabulary, UnknownTokenThrows) {
  Vocabulary v(base_tokens(16));
  EXPECT_EQ(code_of([&] { v.id("nope"); }), ErrorCode::kUnknownToken);
}

TEST(Vocabulary, RenderDropsTrailingEos) {
  Vocabulary v(base_tokens(16));
  TokenSeq s = {v.id("t2"), v.id("t3"), v.eos()};
  EXPECT_EQ(v.render(s), "t2 t3");
}

TEST(Split, OverlapAndCountsAreChecked) {
  DatasetSplit s;
  s.train_ids = {"a", "b"};
  s.dev_ids = {"c"};
  s.benchmark_ids = {"b"};
  s.declared_counts = {2, 1, 1};
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::kSplitOverlap);
  s.benchmark_ids = {"d"};
  s.declared_counts = {2, 1, 2};
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::kSplitCountMismatch);
  s.declared_counts = {2, 1, 1};
  EXPECT_NO_THROW(s.validate());
  EXPECT_TRUE(s.is_benchmark("d"));
  EXPECT_EQ(s.part_of("zzz"), DatasetSplit::Part::kNone);
}

TEST(Synth, DeterministicUnderSeed) {
  auto a = serialize_corpus(culcap::testing::small_corpus(7));
  auto b = serialize_corpus(culcap::testing::small_corpus(7));
  EXPECT_EQ(a, b);
  auto c = serialize_corpus(culcap::testing::small_corpus(8));
  EXPECT_NE(a, c);
}

TEST(Synth, SplitSizesMatchAndAreDisjoint) {
  SynthConfig cfg;
  cfg.splits = {35, 5, 10};
  Corpus c = generate_synthetic_corpus(cfg, 1);
  EXPECT_EQ(c.split.train_ids.size(), 35u);
  EXPECT_EQ(c.split.dev_ids.size(), 5u);
  EXPECT_EQ(c.split.benchmark_ids.size(), 10u);
  std::set<std::string> all;
  for (const auto* ids : {&c.split.train_ids, &c.split.dev_ids, &c.split.benchmark_ids}) {
    for (const auto& id : *ids) EXPECT_TRUE(all.insert(id).second) << id;
  }
}

// Independent scan of the written files: every Western reference holds a
// Western marker and a token of its own image.
TEST(Synth, ReferenceCaptionsCarryMarkerAndImageToken) {
  TempDir dir("synth_scan");
  write_corpus(culcap::testing::small_corpus(4), dir.str());

  std::map<std::string, std::set<std::string>> image_tokens;
  std::ifstream images(dir.file("images.jsonl"));
  for (std::string line; std::getline(images, line);) {
    auto j = nlohmann::json::parse(line);
    for (const auto& t : j["descriptor_tokens"]) {
      image_tokens[j["image_id"]].insert(t.get<std::string>());
    }
  }
  std::ifstream captions(dir.file("captions.jsonl"));
  std::size_t checked = 0;
  for (std::string line; std::getline(captions, line);) {
    auto j = nlohmann::json::parse(line);
    if (j["role"] != "reference" || j["context"] != "western") continue;
    bool marker = false, own = false;
    for (const auto& t : j["text"]) {
      const auto s = t.get<std::string>();
      marker = marker || s.rfind("w_", 0) == 0;
      own = own || image_tokens[j["image_id"]].count(s) > 0;
    }
    EXPECT_TRUE(marker && own) << line;
    ++checked;
  }
  EXPECT_EQ(checked, 20u);
}

TEST(Synth, RejectsOverlappingMarkers) {
  SynthConfig cfg = culcap::testing::small_synth();
  cfg.western_markers = {"ha", "lol"};
  cfg.eastern_markers = {"lol", "xd"};
  EXPECT_EQ(code_of([&] { generate_synthetic_corpus(cfg, 1); }), ErrorCode::kSynthConfig);
}

TEST(Synth, ContentImagesHaveDistinctDescriptorSets) {
  Corpus c = culcap::testing::small_corpus(5);
  std::set<TokenSeq> seen;
  for (const auto& img : c.images) {
    if (c.lexicon.vocab.token(img.descriptor_tokens[0]).rfind("obj_", 0) != 0) continue;
    TokenSeq key = img.descriptor_tokens;
    std::sort(key.begin(), key.end());
    EXPECT_TRUE(seen.insert(key).second) << img.image_id;
  }
}

TEST(CorpusIo, RoundTripIsByteStable) {
  Corpus c = culcap::testing::small_corpus(2);
  TempDir dir("roundtrip");
  write_corpus(c, dir.str());
  Corpus loaded = load_corpus(dir.str());
  EXPECT_EQ(serialize_corpus(loaded), serialize_corpus(c));
  EXPECT_EQ(loaded.content_hash, corpus_hash(c));
  EXPECT_EQ(loaded.degradations.size(), c.degradations.size());
}

TEST(CorpusIo, UnknownImageInCaptionsIsRejected) {
  Corpus c = culcap::testing::small_corpus(2);
  TempDir dir("unknown_image");
  write_corpus(c, dir.str());
  std::ofstream(dir.file("captions.jsonl"), std::ios::app)
      << R"({"image_id":"ghost","context":"western","role":"training","text":["w_0"]})"
      << "\n";
  EXPECT_EQ(code_of([&] { load_corpus(dir.str()); }), ErrorCode::kUnknownImage);
}

TEST(CorpusIo, MalformedLineIsRejected) {
  Corpus c = culcap::testing::small_corpus(2);
  TempDir dir("malformed");
  write_corpus(c, dir.str());
  std::ofstream(dir.file("images.jsonl"), std::ios::app) << "{not json\n";
  EXPECT_EQ(code_of([&] { load_corpus(dir.str()); }), ErrorCode::kMalformedLine);
}

TEST(CorpusIo, MissingDirectoryIsIoError) {
  EXPECT_EQ(code_of([] { load_corpus("/nonexistent/culcap/dir"); }), ErrorCode::kIo);
}

TEST(Mixture, FullScaleCounts) {
  auto c = mixture_counts(1000, StageMixture{});
  EXPECT_EQ(c[0], 500u);
  EXPECT_EQ(c[1], 300u);
  EXPECT_EQ(c[2], 200u);
}

TEST(Mixture, FractionsMustSumToOne) {
  EXPECT_EQ(code_of([] { mixture_counts(10, StageMixture{0.5, 0.3, 0.3}); }),
            ErrorCode::kMixtureSum);
}

// Oracle: round each share, then hand the difference to the first category
// holding the maximal fraction.
TEST(Mixture, MatchesEnumeratedOracleAndConservesTotal) {
  Rng rng(11);
  for (int trial = 0; trial < 20000; ++trial) {
    const std::size_t total = uniform_index(rng, 2000);
    int a = static_cast<int>(uniform_index(rng, 21));
    int b = static_cast<int>(uniform_index(rng, 21 - a));
    int c = 20 - a - b;
    StageMixture m{a / 20.0, b / 20.0, c / 20.0};
    const double fr[3] = {m.new_eastern_frac, m.paired_eastern_frac, m.western_replay_frac};
    long long want[3];
    long long sum = 0;
    int best = 0;
    for (int i = 0; i < 3; ++i) {
      want[i] = static_cast<long long>(std::floor(static_cast<double>(total) * fr[i] + 0.5));
      sum += want[i];
    }
    for (int i = 1; i < 3; ++i) {
      if (fr[i] > fr[best]) best = i;
    }
    want[best] += static_cast<long long>(total) - sum;
    auto got = mixture_counts(total, m);
    ASSERT_EQ(got[0] + got[1] + got[2], total);
    for (int i = 0; i < 3; ++i) ASSERT_EQ(static_cast<long long>(got[i]), want[i]);
  }
}

TEST(Mixture, PoolsAndSampling) {
  Corpus c = culcap::testing::small_corpus(3);
  auto pools = stage3_pools(c);
  EXPECT_FALSE(pools.new_eastern.empty());
  EXPECT_FALSE(pools.paired_eastern.empty());
  EXPECT_FALSE(pools.western_replay.empty());
  for (const auto& r : pools.new_eastern) EXPECT_EQ(r.context, CultureContext::kEastern);
  for (const auto& r : pools.western_replay) EXPECT_EQ(r.context, CultureContext::kWestern);

  StageMixture only_replay{0.0, 0.0, 1.0};
  auto mix = build_stage3_mixture(10, only_replay, pools, 4);
  EXPECT_EQ(mix.size(), 10u);
  for (const auto& r : mix) EXPECT_EQ(r.context, CultureContext::kWestern);

  EXPECT_EQ(build_stage3_mixture(10, StageMixture{}, pools, 4).size(), 10u);
  EXPECT_EQ(code_of([&] { build_stage3_mixture(100000, StageMixture{}, pools, 4); }),
            ErrorCode::kInsufficientPool);
  EXPECT_EQ(serialize_corpus(c), serialize_corpus(culcap::testing::small_corpus(3)));
}

TEST(Common, FnvKnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Common, DeriveSeedSeparatesPaths) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
}

TEST(Common, ErrorCodeNamesAreDistinct) {
  std::set<std::string_view> names;
  for (int i = 0; i <= static_cast<int>(ErrorCode::kBenchmarkLeak); ++i) {
    EXPECT_TRUE(names.insert(code_name(static_cast<ErrorCode>(i))).second);
  }
}
