#include "culcap/embedding.hpp"

#include <cmath>

#include "json.hpp"

namespace culcap {

double dot(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShapeMismatch, "embedding dims differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const Embedding& v) { return std::sqrt(dot(v, v)); }

double cosine(const Embedding& a, const Embedding& b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

std::vector<Embedding> TextEncoder::embed_many(std::span<const TokenSeq> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

HashedNgramEncoder::HashedNgramEncoder(const Vocabulary& vocab, std::size_t dim)
    : vocab_(vocab), dim_(dim) {
  if (dim_ == 0) throw Error(ErrorCode::kConfig, "embedding dim must be positive");
}

namespace {

void add_feature(Embedding& v, std::string_view feature) {
  const std::uint64_t h = fnv1a(feature);
  const std::size_t bucket = static_cast<std::size_t>(h % v.size());
  v[bucket] += ((h >> 32) & 1U) ? -1.0 : 1.0;
}

}  // namespace

Embedding HashedNgramEncoder::raw_counts(std::span<const TokenId> text) const {
  const auto body = caption_body(text, vocab_.eos());
  Embedding v(dim_, 0.0);
  for (std::size_t i = 0; i < body.size(); ++i) {
    add_feature(v, "u:" + vocab_.token(body[i]));
    if (i + 1 < body.size()) {
      add_feature(v, "b:" + vocab_.token(body[i]) + "\x1f" + vocab_.token(body[i + 1]));
    }
  }
  return v;
}

Embedding HashedNgramEncoder::embed(std::span<const TokenId> text) {
  Embedding v = raw_counts(text);
  const double n = l2_norm(v);
  if (n == 0.0) throw ZeroEmbedding("text has a zero-norm embedding");
  for (double& x : v) x /= n;
  return v;
}

ExternalEncoder::ExternalEncoder(const Vocabulary& vocab, std::size_t dim, PostFn post,
                                 int retries)
    : vocab_(vocab), dim_(dim), post_(std::move(post)), retries_(retries) {
  if (!post_) throw Error(ErrorCode::kConfig, "external encoder needs a transport");
}

Embedding ExternalEncoder::embed(std::span<const TokenId> text) {
  std::vector<TokenSeq> one = {TokenSeq(text.begin(), text.end())};
  return embed_many(one).front();
}

std::vector<Embedding> ExternalEncoder::embed_many(std::span<const TokenSeq> texts) {
  nlohmann::json req;
  req["texts"] = nlohmann::json::array();
  for (const auto& t : texts) req["texts"].push_back(vocab_.render(t));
  std::string body;
  std::string last_error;
  bool ok = false;
  for (int attempt = 0; attempt <= retries_ && !ok; ++attempt) {
    try {
      body = post_(req.dump());
      ok = true;
    } catch (const TransportFailure& e) {
      last_error = e.what();
    }
  }
  if (!ok) throw EmbeddingUnavailable("embedding endpoint unreachable: " + last_error);

  std::vector<Embedding> out;
  try {
    const auto j = nlohmann::json::parse(body);
    const auto& vecs = j.at("vectors");
    if (!vecs.is_array() || vecs.size() != texts.size()) {
      throw EmbeddingUnavailable("embedding response has the wrong number of vectors");
    }
    for (const auto& v : vecs) {
      Embedding e = v.get<Embedding>();
      if (e.size() != dim_) throw EmbeddingUnavailable("embedding response has the wrong dim");
      const double n = l2_norm(e);
      if (!std::isfinite(n)) throw EmbeddingUnavailable("non-finite embedding");
      if (n == 0.0) throw ZeroEmbedding("endpoint returned a zero vector");
      for (double& x : e) x /= n;
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw EmbeddingUnavailable(std::string("bad embedding response: ") + e.what());
  }
  return out;
}

}  // namespace culcap
