#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace culcap {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Stable error codes. The CLI prints code_name() verbatim, so never rename one.
enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kMalformedLine,
  kUnknownToken,
  kDuplicateId,
  kUnknownImage,
  kSplitOverlap,
  kSplitCountMismatch,
  kInvalidRecord,
  kMissingReference,
  kInsufficientPool,
  kMixtureSum,
  kSynthConfig,
  kEmptySequence,
  kNonFiniteGradient,
  kShapeMismatch,
  kJudgeProtocol,
  kJudgeUnavailable,
  kZeroEmbedding,
  kEmbeddingUnavailable,
  kDegeneratePrototype,
  kMissingDirection,
  kRangeError,
  kMissingCheckpoint,
  kCheckpointMismatch,
  kConfig,
  kDuplicateScore,
  kSourceConflict,
  kMissingVerdict,
  kBenchmarkLeak,
};

std::string_view code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class JudgeProtocolError : public Error {
 public:
  explicit JudgeProtocolError(const std::string& message)
      : Error(ErrorCode::kJudgeProtocol, message) {}
};

class JudgeUnavailable : public Error {
 public:
  explicit JudgeUnavailable(const std::string& message)
      : Error(ErrorCode::kJudgeUnavailable, message) {}
};

class ZeroEmbedding : public Error {
 public:
  explicit ZeroEmbedding(const std::string& message)
      : Error(ErrorCode::kZeroEmbedding, message) {}
};

class EmbeddingUnavailable : public Error {
 public:
  explicit EmbeddingUnavailable(const std::string& message)
      : Error(ErrorCode::kEmbeddingUnavailable, message) {}
};

class DegeneratePrototype : public Error {
 public:
  explicit DegeneratePrototype(const std::string& message)
      : Error(ErrorCode::kDegeneratePrototype, message) {}
};

// 64-bit FNV-1a. Used wherever a hash must be stable across runs and
// platforms (vocabulary/corpus fingerprints, n-gram buckets).
std::uint64_t fnv1a(std::string_view data,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// Derives an independent stream seed from a parent seed and a path of
// integers (stage, step, sample index, ...).
std::uint64_t derive_seed(std::uint64_t parent,
                          std::initializer_list<std::uint64_t> path);

using Rng = std::mt19937_64;

// Uniform in [0, 1) with 53 random bits. Spelled out instead of
// std::uniform_real_distribution so streams match across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

template <typename T>
void seeded_shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace culcap
