#include "trustroute/providers/embedding.hpp"

#include <cmath>
#include <json.hpp>
#include <unordered_map>

#include "trustroute/text.hpp"

namespace trustroute {

using nlohmann::json;

EmbeddingTriple embed_one(Embedder& embedder, const std::string& text) {
  auto out = embedder.embed({text});
  return std::move(out.front());
}

double cosine(std::span<const float> a, std::span<const float> b) {
  const std::size_t n = std::min(a.size(), b.size());
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  for (std::size_t i = n; i < a.size(); ++i) na += static_cast<double>(a[i]) * a[i];
  for (std::size_t i = n; i < b.size(); ++i) nb += static_cast<double>(b[i]) * b[i];
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void l2_normalize(std::vector<float>& v) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  if (norm <= 0.0) return;
  const double inv = 1.0 / std::sqrt(norm);
  for (float& x : v) x = static_cast<float>(x * inv);
}

// ---------------------------------------------------------------------------

namespace {

void add_hashed(std::vector<float>& v, std::string_view feature, float weight) {
  const auto h = text::fnv1a64(feature);
  const auto idx = static_cast<std::size_t>(h % v.size());
  const float sign = (h >> 63) != 0 ? -1.0f : 1.0f;
  v[idx] += sign * weight;
}

void add_trigrams(std::vector<float>& v, const std::string& token, std::string_view salt) {
  const std::string padded = "<" + token + ">";
  if (padded.size() <= 3) {
    add_hashed(v, std::string(salt) + padded, 1.0f);
    return;
  }
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    add_hashed(v, std::string(salt) + padded.substr(i, 3), 1.0f);
  }
}

}  // namespace

HashingEmbedder::HashingEmbedder(std::size_t dense_dim, std::size_t token_dim)
    : dense_dim_(dense_dim), token_dim_(token_dim) {
  if (dense_dim_ == 0 || token_dim_ == 0) throw ContractError("embedding dimensions must be > 0");
}

std::string HashingEmbedder::name() const {
  return "hashing-v1-" + std::to_string(dense_dim_) + "x" + std::to_string(token_dim_);
}

EmbeddingTriple HashingEmbedder::embed_text(const std::string& input) const {
  EmbeddingTriple t;
  t.dense.assign(dense_dim_, 0.0f);
  if (text::trim(input).empty()) return t;

  const auto tokens = text::word_tokens(input);
  std::map<std::string, int> counts;
  for (const auto& tok : tokens) ++counts[tok];
  for (const auto& [tok, c] : counts) {
    t.sparse.emplace(tok, static_cast<float>(1.0 + std::log(static_cast<double>(c))));
  }

  for (const auto& tok : tokens) {
    add_trigrams(t.dense, tok, "d:");
    add_hashed(t.dense, "w:" + tok, 2.0f);
  }
  l2_normalize(t.dense);

  std::unordered_map<std::string, std::size_t> seen;
  t.token_vectors.reserve(tokens.size());
  for (const auto& tok : tokens) {
    if (auto it = seen.find(tok); it != seen.end()) {
      t.token_vectors.push_back(t.token_vectors[it->second]);
      continue;
    }
    std::vector<float> v(token_dim_, 0.0f);
    add_trigrams(v, tok, "t:");
    add_hashed(v, "tw:" + tok, 1.5f);
    l2_normalize(v);
    seen.emplace(tok, t.token_vectors.size());
    t.token_vectors.push_back(std::move(v));
  }
  return t;
}

std::vector<EmbeddingTriple> HashingEmbedder::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ContractError("embed() needs at least one text");
  std::vector<EmbeddingTriple> out;
  out.reserve(texts.size());
  for (const auto& s : texts) out.push_back(embed_text(s));
  return out;
}

// ---------------------------------------------------------------------------

RemoteEmbedder::RemoteEmbedder(HttpEndpoint endpoint, std::size_t batch_size)
    : endpoint_(std::move(endpoint)), batch_size_(std::max<std::size_t>(1, batch_size)) {}

std::size_t RemoteEmbedder::dense_dim() const {
  std::lock_guard lock(mu_);
  return dim_;
}

std::vector<EmbeddingTriple> parse_embedding_payload(std::string_view body, std::size_t expected,
                                                     const std::vector<std::string>& texts,
                                                     const HashingEmbedder& fallback) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProviderError(std::string("malformed embedding payload: ") + e.what());
  }
  std::vector<EmbeddingTriple> out(expected);
  try {
    const auto& data = j.at("data");
    if (!data.is_array() || data.size() != expected) {
      throw ProviderError("embedding payload has " + std::to_string(data.size()) +
                          " items, expected " + std::to_string(expected));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& item = data[i];
      const std::size_t slot = item.value("index", i);
      if (slot >= expected) throw ProviderError("embedding index out of range");
      auto& t = out[slot];
      t.dense = item.at("embedding").get<std::vector<float>>();
      l2_normalize(t.dense);
      bool need_fallback = false;
      if (auto s = item.find("sparse"); s != item.end() && s->is_object()) {
        for (auto it = s->begin(); it != s->end(); ++it) {
          const float w = it.value().get<float>();
          if (w > 0.0f) t.sparse.emplace(it.key(), w);
        }
      } else {
        need_fallback = true;
      }
      if (auto tv = item.find("token_embeddings"); tv != item.end() && tv->is_array()) {
        for (const auto& row : *tv) {
          auto v = row.get<std::vector<float>>();
          l2_normalize(v);
          t.token_vectors.push_back(std::move(v));
        }
      } else {
        need_fallback = true;
      }
      if (need_fallback) {
        auto local = fallback.embed_text(texts[slot]);
        if (item.find("sparse") == item.end()) t.sparse = std::move(local.sparse);
        if (item.find("token_embeddings") == item.end()) {
          t.token_vectors = std::move(local.token_vectors);
        }
      }
    }
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed embedding payload: ") + e.what());
  }
  return out;
}

std::vector<EmbeddingTriple> RemoteEmbedder::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ContractError("embed() needs at least one text");
  std::vector<EmbeddingTriple> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
    const std::size_t end = std::min(texts.size(), start + batch_size_);
    std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                   texts.begin() + static_cast<std::ptrdiff_t>(end));
    json payload = {{"model", endpoint_.model}, {"input", batch}};
    auto body = post_json(endpoint_, "/embeddings", payload.dump());
    auto part = parse_embedding_payload(body, batch.size(), batch, fallback_);
    for (auto& t : part) {
      std::lock_guard lock(mu_);
      if (dim_ == 0) dim_ = t.dense.size();
      if (t.dense.size() != dim_) throw ProviderError("embedding dimensionality changed");
      out.push_back(std::move(t));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<EmbeddingTriple> CachingEmbedder::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ContractError("embed() needs at least one text");
  std::vector<std::shared_ptr<const EmbeddingTriple>> found(texts.size());
  std::vector<std::string> missing;
  std::vector<std::size_t> missing_idx;
  {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (auto it = cache_.find(texts[i]); it != cache_.end()) {
        found[i] = it->second;
      } else {
        missing.push_back(texts[i]);
        missing_idx.push_back(i);
      }
    }
  }
  if (!missing.empty()) {
    auto fresh = inner_.embed(missing);
    std::lock_guard lock(mu_);
    for (std::size_t k = 0; k < fresh.size(); ++k) {
      auto ptr = std::make_shared<const EmbeddingTriple>(std::move(fresh[k]));
      cache_.emplace(missing[k], ptr);
      found[missing_idx[k]] = std::move(ptr);
    }
  }
  std::vector<EmbeddingTriple> out;
  out.reserve(texts.size());
  for (const auto& p : found) out.push_back(*p);
  return out;
}

std::size_t CachingEmbedder::size() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

}  // namespace trustroute
