#pragma once

#include <optional>
#include <string>
#include <vector>

#include "culcap/policy.hpp"
#include "culcap/vocab.hpp"

namespace culcap {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointRecord {
  std::string stage;  // "stage1", "stage2", "stage3", "base"
  std::size_t step = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t corpus_hash = 0;
  PolicyParams params;
  // Every image id that contributed a training signal, sorted.
  std::vector<std::string> trained_images;
};

std::string dump_checkpoint(const CheckpointRecord& record, const Vocabulary& vocab);

// Rejects a vocabulary-hash mismatch and, when given, a corpus-hash mismatch
// (kCheckpointMismatch).
CheckpointRecord parse_checkpoint(std::string_view text, const Vocabulary& vocab,
                                  std::optional<std::uint64_t> expected_corpus_hash = {});

void save_checkpoint(const std::string& path, const CheckpointRecord& record,
                     const Vocabulary& vocab);
// kMissingCheckpoint when the file does not exist.
CheckpointRecord load_checkpoint(const std::string& path, const Vocabulary& vocab,
                                 std::optional<std::uint64_t> expected_corpus_hash = {});

}  // namespace culcap
