#include "culcap/common.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace culcap {

std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kIo: return "IO_ERROR";
    case ErrorCode::kMalformedLine: return "MALFORMED_LINE";
    case ErrorCode::kUnknownToken: return "UNKNOWN_TOKEN";
    case ErrorCode::kDuplicateId: return "DUPLICATE_ID";
    case ErrorCode::kUnknownImage: return "UNKNOWN_IMAGE";
    case ErrorCode::kSplitOverlap: return "SPLIT_OVERLAP";
    case ErrorCode::kSplitCountMismatch: return "SPLIT_COUNT_MISMATCH";
    case ErrorCode::kInvalidRecord: return "INVALID_RECORD";
    case ErrorCode::kMissingReference: return "MISSING_REFERENCE";
    case ErrorCode::kInsufficientPool: return "INSUFFICIENT_POOL";
    case ErrorCode::kMixtureSum: return "MIXTURE_SUM";
    case ErrorCode::kSynthConfig: return "SYNTH_CONFIG";
    case ErrorCode::kEmptySequence: return "EMPTY_SEQUENCE";
    case ErrorCode::kNonFiniteGradient: return "NON_FINITE_GRADIENT";
    case ErrorCode::kShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::kJudgeProtocol: return "JUDGE_PROTOCOL";
    case ErrorCode::kJudgeUnavailable: return "JUDGE_UNAVAILABLE";
    case ErrorCode::kZeroEmbedding: return "ZERO_EMBEDDING";
    case ErrorCode::kEmbeddingUnavailable: return "EMBEDDING_UNAVAILABLE";
    case ErrorCode::kDegeneratePrototype: return "DEGENERATE_PROTOTYPE";
    case ErrorCode::kMissingDirection: return "MISSING_DIRECTION";
    case ErrorCode::kRangeError: return "RANGE_ERROR";
    case ErrorCode::kMissingCheckpoint: return "MISSING_CHECKPOINT";
    case ErrorCode::kCheckpointMismatch: return "CHECKPOINT_MISMATCH";
    case ErrorCode::kConfig: return "CONFIG_ERROR";
    case ErrorCode::kDuplicateScore: return "DUPLICATE_SCORE";
    case ErrorCode::kSourceConflict: return "SOURCE_CONFLICT";
    case ErrorCode::kMissingVerdict: return "MISSING_VERDICT";
    case ErrorCode::kBenchmarkLeak: return "BENCHMARK_LEAK";
  }
  return "UNKNOWN";
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx",
                static_cast<unsigned long long>(value));
  return std::string(buf.data());
}

namespace {
std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t parent,
                          std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix(parent);
  for (std::uint64_t p : path) s = splitmix(s ^ splitmix(p + 0x632be59bd9b4e019ULL));
  return s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

}  // namespace culcap
