#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "culcap/common.hpp"

namespace culcap {

enum class CultureContext { kNone = 0, kWestern = 1, kEastern = 2 };

inline constexpr std::array<CultureContext, 3> kAllContexts = {
    CultureContext::kNone, CultureContext::kWestern, CultureContext::kEastern};

std::string_view to_string(CultureContext context);
CultureContext parse_context(std::string_view text);
// "en" for Western and no-context prompts, "zh" for Eastern ones.
std::string_view language_tag(CultureContext context);

inline constexpr std::string_view kRefusalTemplate =
    "This image does not provide sufficient support for a humorous caption "
    "in the requested cultural context.";

std::vector<std::string> split_words(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::string_view kBos = "<bos>";
  static constexpr std::string_view kEos = "<eos>";

  Vocabulary() = default;
  // Requires BOS and EOS exactly once, distinct tokens, and at least 16 entries.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  TokenId bos() const { return bos_; }
  TokenId eos() const { return eos_; }

  std::optional<TokenId> find(std::string_view token) const;
  // Throws kUnknownToken.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(TokenId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }

  TokenSeq encode(std::span<const std::string> words) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;
  // Space-joined surface form; a trailing EOS is dropped.
  std::string render(std::span<const TokenId> ids) const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId bos_ = -1;
  TokenId eos_ = -1;
};

// Vocabulary plus the culture-marker token sets the judge relies on.
struct Lexicon {
  Vocabulary vocab;
  std::vector<TokenId> western_markers;
  std::vector<TokenId> eastern_markers;

  const std::vector<TokenId>& markers(CultureContext context) const;
  bool is_marker(TokenId id, CultureContext context) const;
  TokenSeq refusal_tokens() const;
};

// Drops one trailing EOS, if present.
std::span<const TokenId> caption_body(std::span<const TokenId> tokens,
                                      TokenId eos);

}  // namespace culcap
