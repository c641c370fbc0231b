#pragma once

#include <memory>
#include <string>
#include <vector>

#include "culcap/http_transport.hpp"
#include "culcap/vocab.hpp"

namespace culcap {

using Embedding = std::vector<double>;

double dot(const Embedding& a, const Embedding& b);
double l2_norm(const Embedding& v);
// Cosine of two unit vectors, or 0 when either has zero norm.
double cosine(const Embedding& a, const Embedding& b);

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  // Unit-norm vector. Throws ZeroEmbedding / EmbeddingUnavailable.
  virtual Embedding embed(std::span<const TokenId> text) = 0;
  virtual std::vector<Embedding> embed_many(std::span<const TokenSeq> texts);
};

// Signed hashing of unigrams and bigrams into `dim` buckets.
class HashedNgramEncoder : public TextEncoder {
 public:
  explicit HashedNgramEncoder(const Vocabulary& vocab, std::size_t dim = 256);

  std::string name() const override { return "builtin"; }
  std::size_t dim() const override { return dim_; }
  Embedding embed(std::span<const TokenId> text) override;
  // Before normalisation; exposed for tests.
  Embedding raw_counts(std::span<const TokenId> text) const;

 private:
  const Vocabulary& vocab_;
  std::size_t dim_;
};

// {texts: [string]} -> {vectors: [[real]]}
class ExternalEncoder : public TextEncoder {
 public:
  ExternalEncoder(const Vocabulary& vocab, std::size_t dim, PostFn post, int retries = 1);

  std::string name() const override { return "external"; }
  std::size_t dim() const override { return dim_; }
  Embedding embed(std::span<const TokenId> text) override;
  std::vector<Embedding> embed_many(std::span<const TokenSeq> texts) override;

 private:
  const Vocabulary& vocab_;
  std::size_t dim_;
  PostFn post_;
  int retries_;
};

}  // namespace culcap
