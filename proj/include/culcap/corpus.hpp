#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "culcap/common.hpp"
#include "culcap/vocab.hpp"

namespace culcap {

struct ImageRecord {
  std::string image_id;
  TokenSeq descriptor_tokens;
  std::optional<std::string> source_uri;
};

enum class CaptionRole { kTraining, kReference, kRefusal };

std::string_view to_string(CaptionRole role);
CaptionRole parse_role(std::string_view text);

struct CaptionRecord {
  std::string image_id;
  CultureContext context = CultureContext::kNone;
  TokenSeq text;  // no BOS/EOS
  CaptionRole role = CaptionRole::kTraining;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t benchmark = 0;
  bool operator==(const SplitCounts&) const = default;
};

struct DatasetSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> dev_ids;
  std::vector<std::string> benchmark_ids;
  SplitCounts declared_counts;

  enum class Part { kTrain, kDev, kBenchmark, kNone };
  Part part_of(const std::string& image_id) const;
  bool is_benchmark(const std::string& image_id) const {
    return part_of(image_id) == Part::kBenchmark;
  }
  // Rebuilds the membership index. Throws kSplitOverlap on a shared id and
  // kSplitCountMismatch when a set's size differs from declared_counts.
  void validate();

 private:
  std::unordered_map<std::string, Part> membership_;
};

struct DegradationAnnotation {
  std::string sample_id;
  std::string direction_id;
  std::vector<TokenSeq> evidence_texts;
  double weight = 1.0;
};

struct StageMixture {
  double new_eastern_frac = 0.5;
  double paired_eastern_frac = 0.3;
  double western_replay_frac = 0.2;
};

struct Corpus {
  Lexicon lexicon;
  std::vector<ImageRecord> images;
  std::vector<CaptionRecord> captions;
  std::vector<DegradationAnnotation> degradations;
  DatasetSplit split;
  std::vector<std::string> warnings;
  std::uint64_t content_hash = 0;

  const ImageRecord& image(const std::string& image_id) const;
  bool has_image(const std::string& image_id) const {
    return image_index_.count(image_id) != 0;
  }
  std::optional<CaptionRecord> reference(const std::string& image_id,
                                         CultureContext context) const;
  std::vector<const DegradationAnnotation*> annotations_for(
      const std::string& sample_id) const;

  // Appends and indexes an image; throws kDuplicateId.
  void add_image(ImageRecord record);
  // Rebuilds the image and reference lookups after direct edits.
  void reindex();

 private:
  std::unordered_map<std::string, std::size_t> image_index_;
  std::map<std::pair<std::string, CultureContext>, std::size_t> reference_index_;
};

// Reads vocab.json, images.jsonl, captions.jsonl, splits.json and the optional
// degradations.jsonl from `dir`. Record order follows file position.
Corpus load_corpus(const std::string& dir);

// (file name, contents) in load order. Byte-stable for equal corpora.
std::vector<std::pair<std::string, std::string>> serialize_corpus(
    const Corpus& corpus);
// Equals the content_hash load_corpus computes for the written files.
std::uint64_t corpus_hash(const Corpus& corpus);
// Inverse of load_corpus.
void write_corpus(const Corpus& corpus, const std::string& dir);

// Stage-3 caption pools, derived from the training split:
// new-Eastern: Eastern captions of images with no Western training caption;
// paired-Eastern: Eastern captions of images that also have one;
// Western replay: Western training captions.
struct Stage3Pools {
  std::vector<CaptionRecord> new_eastern;
  std::vector<CaptionRecord> paired_eastern;
  std::vector<CaptionRecord> western_replay;
};

Stage3Pools stage3_pools(const Corpus& corpus);

// round(total * frac) per category, remainder to the largest fraction
// (earliest declared on ties).
std::array<std::size_t, 3> mixture_counts(std::size_t total,
                                          const StageMixture& mixture);

std::vector<CaptionRecord> build_stage3_mixture(std::size_t total,
                                                const StageMixture& mixture,
                                                const Stage3Pools& pools,
                                                std::uint64_t seed);

}  // namespace culcap
