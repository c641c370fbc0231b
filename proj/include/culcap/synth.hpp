#pragma once

#include <string>
#include <vector>

#include "culcap/corpus.hpp"

namespace culcap {

// Desk-scale stand-in for the captioning corpus. Images are bags of content
// tokens; captions mix an image's descriptor tokens with culture markers.
struct SynthConfig {
  std::size_t content_tokens = 48;
  std::size_t bland_tokens = 4;
  std::size_t descriptor_len = 2;
  std::size_t markers_per_culture = 4;
  // Explicit marker names override the generated w_i / e_i sets.
  std::vector<std::string> western_markers;
  std::vector<std::string> eastern_markers;
  SplitCounts splits{350, 50, 100};
  // Train images held out of stage 1; they only get Eastern captions.
  double new_image_frac = 1.0 / 7.0;
  // Share of stage-1 images that also get an Eastern caption.
  double paired_frac = 0.15;
  // Share of stage-1 images whose target is the refusal template.
  double refusal_frac = 1.0 / 30.0;
  // Share of captioned stage-1 images carrying degradation annotations.
  double annotated_frac = 0.25;
};

// Token sequence containing the image's punch bigram, all of its descriptor
// tokens, and two distinct markers of `context`, in a seeded order.
TokenSeq synth_caption(const ImageRecord& image, const Lexicon& lexicon,
                       CultureContext context, Rng& rng);

Corpus generate_synthetic_corpus(const SynthConfig& config, std::uint64_t seed);

}  // namespace culcap
