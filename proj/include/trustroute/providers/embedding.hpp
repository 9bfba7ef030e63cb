#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "trustroute/providers/chat.hpp"

namespace trustroute {

/// Three views of one text: a unit-norm dense vector, non-negative lexical
/// weights, and one unit-norm vector per token for late interaction.
struct EmbeddingTriple {
  std::vector<float> dense;
  std::map<std::string, float> sparse;
  std::vector<std::vector<float>> token_vectors;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// One triple per input, same order. Throws ContractError on empty input.
  virtual std::vector<EmbeddingTriple> embed(const std::vector<std::string>& texts) = 0;
  virtual std::string name() const = 0;
  virtual std::size_t dense_dim() const = 0;
};

EmbeddingTriple embed_one(Embedder& embedder, const std::string& text);

/// Cosine in double precision; 0 when either vector has zero norm.
double cosine(std::span<const float> a, std::span<const float> b);
void l2_normalize(std::vector<float>& v);

/// In-tree deterministic backend, no network. Lexical weights are
/// 1 + ln(tf) per lowercased word; dense vectors are signed feature hashes
/// of word character trigrams plus whole words; token vectors are signed
/// hashes of each word's trigrams, so related spellings stay close.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dense_dim = 256, std::size_t token_dim = 64);

  std::vector<EmbeddingTriple> embed(const std::vector<std::string>& texts) override;
  std::string name() const override;
  std::size_t dense_dim() const override { return dense_dim_; }

  EmbeddingTriple embed_text(const std::string& text) const;

 private:
  std::size_t dense_dim_;
  std::size_t token_dim_;
};

/// Batched embedding service. POSTs {"model", "input": [...]} to
/// base_url + "/embeddings" and reads data[i].embedding (dense),
/// data[i].sparse (token -> weight, optional) and data[i].token_embeddings
/// (optional). Missing optional views are filled by the hashing backend.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(HttpEndpoint endpoint, std::size_t batch_size = 32);

  std::vector<EmbeddingTriple> embed(const std::vector<std::string>& texts) override;
  std::string name() const override { return "remote:" + endpoint_.model; }
  std::size_t dense_dim() const override;

 private:
  HttpEndpoint endpoint_;
  std::size_t batch_size_;
  HashingEmbedder fallback_;
  mutable std::mutex mu_;
  std::size_t dim_ = 0;
};

std::vector<EmbeddingTriple> parse_embedding_payload(std::string_view body, std::size_t expected,
                                                     const std::vector<std::string>& texts,
                                                     const HashingEmbedder& fallback);

/// Memoises another embedder by exact text. Thread-safe.
class CachingEmbedder final : public Embedder {
 public:
  explicit CachingEmbedder(Embedder& inner) : inner_(inner) {}

  std::vector<EmbeddingTriple> embed(const std::vector<std::string>& texts) override;
  std::string name() const override { return inner_.name(); }
  std::size_t dense_dim() const override { return inner_.dense_dim(); }

  std::size_t size() const;

 private:
  Embedder& inner_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<const EmbeddingTriple>> cache_;
};

}  // namespace trustroute
