#include "culcap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace culcap {

namespace {

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
  return buf;
}

std::size_t scaled(std::size_t n, double frac) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * frac));
}

template <typename T>
std::vector<T> draw_distinct(const std::vector<T>& pool, std::size_t n, Rng& rng) {
  std::vector<T> copy = pool;
  seeded_shuffle(copy, rng);
  copy.resize(std::min(n, copy.size()));
  return copy;
}

}  // namespace

TokenSeq synth_caption(const ImageRecord& image, const Lexicon& lexicon,
                       CultureContext context, Rng& rng) {
  const auto& desc = image.descriptor_tokens;
  std::vector<TokenSeq> blocks;
  if (desc.size() >= 2) {
    blocks.push_back({desc[0], desc[1]});
    for (std::size_t i = 2; i < desc.size(); ++i) blocks.push_back({desc[i]});
  } else {
    blocks.push_back(desc);
  }
  for (TokenId m : draw_distinct(lexicon.markers(context), 2, rng)) {
    blocks.push_back({m});
  }
  seeded_shuffle(blocks, rng);
  TokenSeq out;
  for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
  return out;
}

Corpus generate_synthetic_corpus(const SynthConfig& config, std::uint64_t seed) {
  if (config.descriptor_len < 2 || config.content_tokens < config.descriptor_len) {
    throw Error(ErrorCode::kSynthConfig,
                "content vocabulary too small for descriptor_len");
  }
  std::vector<std::string> western = config.western_markers;
  std::vector<std::string> eastern = config.eastern_markers;
  if (western.empty()) {
    for (std::size_t i = 0; i < config.markers_per_culture; ++i) {
      western.push_back(numbered("w_", i, 1));
    }
  }
  if (eastern.empty()) {
    for (std::size_t i = 0; i < config.markers_per_culture; ++i) {
      eastern.push_back(numbered("e_", i, 1));
    }
  }
  if (western.size() < 2 || eastern.size() < 2) {
    throw Error(ErrorCode::kSynthConfig, "each culture needs at least 2 markers");
  }
  for (const auto& w : western) {
    if (std::find(eastern.begin(), eastern.end(), w) != eastern.end()) {
      throw Error(ErrorCode::kSynthConfig,
                  "marker '" + w + "' is in both culture marker sets");
    }
  }

  std::vector<std::string> tokens = {std::string(Vocabulary::kBos),
                                     std::string(Vocabulary::kEos)};
  std::vector<std::string> content;
  for (std::size_t i = 0; i < config.content_tokens; ++i) {
    content.push_back(numbered("obj_", i, 2));
  }
  std::vector<std::string> bland;
  for (std::size_t i = 0; i < config.bland_tokens; ++i) {
    bland.push_back(numbered("bland_", i, 1));
  }
  for (const auto* group : {&content, &bland, &western, &eastern}) {
    tokens.insert(tokens.end(), group->begin(), group->end());
  }
  for (const auto& w : split_words(kRefusalTemplate)) {
    if (std::find(tokens.begin(), tokens.end(), w) == tokens.end()) tokens.push_back(w);
  }
  std::set<std::string> distinct(tokens.begin(), tokens.end());
  if (distinct.size() != tokens.size()) {
    throw Error(ErrorCode::kSynthConfig, "marker names collide with other tokens");
  }
  if (tokens.size() < 16) {
    throw Error(ErrorCode::kSynthConfig, "vocabulary too small");
  }

  Corpus corpus;
  corpus.lexicon.vocab = Vocabulary(tokens);
  const Vocabulary& vocab = corpus.lexicon.vocab;
  corpus.lexicon.western_markers = vocab.encode(western);
  corpus.lexicon.eastern_markers = vocab.encode(eastern);
  const TokenSeq content_ids = vocab.encode(content);
  const TokenSeq bland_ids = vocab.encode(bland);

  Rng rng(derive_seed(seed, {0x5e7}));
  const std::size_t n_train = config.splits.train;
  const std::size_t n_total = n_train + config.splits.dev + config.splits.benchmark;

  // Role of each train image, fixed before any token is drawn.
  const std::size_t n_new = scaled(n_train, config.new_image_frac);
  const std::size_t n_stage1 = n_train - n_new;
  const std::size_t n_refusal = std::min(n_stage1, scaled(n_stage1, config.refusal_frac));
  if (n_refusal > 0 && bland_ids.empty()) {
    throw Error(ErrorCode::kSynthConfig, "refusal images need bland tokens");
  }
  const std::size_t n_captioned = n_stage1 - n_refusal;
  const std::size_t n_paired = scaled(n_captioned, config.paired_frac);
  const std::size_t n_annotated = scaled(n_captioned, config.annotated_frac);

  std::vector<std::size_t> order(n_total);
  for (std::size_t i = 0; i < n_total; ++i) order[i] = i;
  seeded_shuffle(order, rng);

  for (std::size_t i = 0; i < n_total; ++i) {
    ImageRecord img;
    img.image_id = numbered("img_", i, 5);
    img.source_uri = "synthetic://" + img.image_id;
    corpus.add_image(std::move(img));
  }

  // order[0 .. n_train) are train images: first n_refusal refusal, then
  // captioned stage-1 images, then the new (stage-3-only) images.
  // Content images never share a descriptor set, so no benchmark image is a
  // relabelled copy of a training image.
  std::set<TokenSeq> used_sets;
  auto draw_content = [&]() {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      TokenSeq d = draw_distinct(content_ids, config.descriptor_len, rng);
      TokenSeq key = d;
      std::sort(key.begin(), key.end());
      if (used_sets.insert(key).second) return d;
    }
    throw Error(ErrorCode::kSynthConfig,
                "content vocabulary too small for distinct descriptor sets");
  };
  for (std::size_t k = 0; k < n_total; ++k) {
    ImageRecord& img = corpus.images[order[k]];
    const bool refusal = k < n_refusal;
    img.descriptor_tokens = refusal
        ? draw_distinct(bland_ids, config.descriptor_len, rng)
        : draw_content();
    if (k < n_train) {
      corpus.split.train_ids.push_back(img.image_id);
    } else if (k < n_train + config.splits.dev) {
      corpus.split.dev_ids.push_back(img.image_id);
    } else {
      corpus.split.benchmark_ids.push_back(img.image_id);
    }
  }
  corpus.split.declared_counts = config.splits;
  corpus.split.validate();

  const TokenSeq refusal_text = corpus.lexicon.refusal_tokens();
  auto add_caption = [&](const ImageRecord& img, CultureContext ctx, CaptionRole role) {
    CaptionRecord rec;
    rec.image_id = img.image_id;
    rec.context = ctx;
    rec.role = role;
    rec.text = role == CaptionRole::kRefusal
                   ? refusal_text
                   : synth_caption(img, corpus.lexicon, ctx, rng);
    corpus.captions.push_back(std::move(rec));
  };

  const auto& w_markers = corpus.lexicon.western_markers;
  for (std::size_t k = 0; k < n_train; ++k) {
    const ImageRecord& img = corpus.images[order[k]];
    if (k < n_refusal) {
      add_caption(img, CultureContext::kWestern, CaptionRole::kRefusal);
      continue;
    }
    if (k >= n_stage1) {
      add_caption(img, CultureContext::kEastern, CaptionRole::kTraining);
      continue;
    }
    const std::size_t c = k - n_refusal;
    add_caption(img, CultureContext::kWestern, CaptionRole::kTraining);
    if (c < n_paired) add_caption(img, CultureContext::kEastern, CaptionRole::kTraining);
    if (c >= n_captioned - n_annotated) {
      DegradationAnnotation spam;
      spam.sample_id = img.image_id;
      spam.direction_id = "marker_spam";
      for (int e = 0; e < 2; ++e) {
        auto pair = draw_distinct(w_markers, 2, rng);
        TokenSeq text;
        const std::size_t len = 4 + uniform_index(rng, 3);
        for (std::size_t t = 0; t < len; ++t) text.push_back(pair[uniform_index(rng, 2)]);
        spam.evidence_texts.push_back(std::move(text));
      }
      corpus.degradations.push_back(std::move(spam));
      DegradationAnnotation refusal;
      refusal.sample_id = img.image_id;
      refusal.direction_id = "over_refusal";
      refusal.evidence_texts.push_back(refusal_text);
      corpus.degradations.push_back(std::move(refusal));
    }
  }
  for (const auto& id : corpus.split.dev_ids) {
    add_caption(corpus.image(id), CultureContext::kWestern, CaptionRole::kTraining);
  }
  for (const auto& id : corpus.split.benchmark_ids) {
    add_caption(corpus.image(id), CultureContext::kWestern, CaptionRole::kReference);
    add_caption(corpus.image(id), CultureContext::kEastern, CaptionRole::kReference);
  }
  // Captions in image order so the files read naturally.
  std::stable_sort(corpus.captions.begin(), corpus.captions.end(),
                   [](const CaptionRecord& a, const CaptionRecord& b) {
                     return a.image_id < b.image_id;
                   });
  corpus.reindex();
  corpus.content_hash = corpus_hash(corpus);
  return corpus;
}

}  // namespace culcap
