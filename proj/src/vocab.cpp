#include "culcap/vocab.hpp"

#include <algorithm>
#include <sstream>

namespace culcap {

std::string_view to_string(CultureContext context) {
  switch (context) {
    case CultureContext::kNone: return "none";
    case CultureContext::kWestern: return "western";
    case CultureContext::kEastern: return "eastern";
  }
  return "none";
}

CultureContext parse_context(std::string_view text) {
  if (text == "none") return CultureContext::kNone;
  if (text == "western") return CultureContext::kWestern;
  if (text == "eastern") return CultureContext::kEastern;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown culture context '" + std::string(text) + "'");
}

std::string_view language_tag(CultureContext context) {
  return context == CultureContext::kEastern ? "zh" : "en";
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  if (tokens_.size() < 16) {
    throw Error(ErrorCode::kInvalidArgument,
                "vocabulary needs at least 16 tokens, got " +
                    std::to_string(tokens_.size()));
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) {
      throw Error(ErrorCode::kInvalidArgument, "empty vocabulary token");
    }
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw Error(ErrorCode::kDuplicateId,
                  "duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
  auto b = index_.find(std::string(kBos));
  auto e = index_.find(std::string(kEos));
  if (b == index_.end() || e == index_.end()) {
    throw Error(ErrorCode::kInvalidArgument,
                "vocabulary must contain <bos> and <eos>");
  }
  bos_ = b->second;
  eos_ = e->second;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto found = find(token);
  if (!found) {
    throw Error(ErrorCode::kUnknownToken,
                "unknown token '" + std::string(token) + "'");
  }
  return *found;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (!contains(id)) {
    throw Error(ErrorCode::kUnknownToken,
                "token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenSeq Vocabulary::encode(std::span<const std::string> words) const {
  TokenSeq out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId t : ids) out.push_back(token(t));
  return out;
}

std::string Vocabulary::render(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId t : caption_body(ids, eos_)) {
    if (!out.empty()) out += ' ';
    out += token(t);
  }
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a("culcap-vocab");
  for (const auto& t : tokens_) {
    h = fnv1a(t, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
  }
  return h;
}

const std::vector<TokenId>& Lexicon::markers(CultureContext context) const {
  static const std::vector<TokenId> kEmpty;
  switch (context) {
    case CultureContext::kWestern: return western_markers;
    case CultureContext::kEastern: return eastern_markers;
    case CultureContext::kNone: return kEmpty;
  }
  return kEmpty;
}

bool Lexicon::is_marker(TokenId id, CultureContext context) const {
  const auto& m = markers(context);
  return std::find(m.begin(), m.end(), id) != m.end();
}

TokenSeq Lexicon::refusal_tokens() const {
  auto words = split_words(kRefusalTemplate);
  return vocab.encode(words);
}

std::span<const TokenId> caption_body(std::span<const TokenId> tokens,
                                      TokenId eos) {
  if (!tokens.empty() && tokens.back() == eos) {
    return tokens.first(tokens.size() - 1);
  }
  return tokens;
}

}  // namespace culcap
