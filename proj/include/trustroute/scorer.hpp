#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trustroute/model.hpp"
#include "trustroute/providers/embedding.hpp"

namespace trustroute {

/// Relative weights of the three granularities. pair_score divides by their
/// sum, so (2, 4, 4) behaves like (0.2, 0.4, 0.4).
struct ScorerWeights {
  double sparse = 0.2;
  double dense = 0.4;
  double late = 0.4;
  double epsilon = 1e-9;

  /// Throws ContractError for negative weights or an all-zero triple.
  void validate() const;
  ScorerWeights normalized() const;
};

struct PairComponents {
  double sparse = 0.0;
  double dense = 0.0;
  double late = 0.0;
};

/// Weighted Jaccard: sum min / max(sum max, eps).
double sparse_similarity(const std::map<std::string, float>& a,
                         const std::map<std::string, float>& b, double epsilon = 1e-9);

/// (1 + cos) / 2, clamped to [0, 1].
double dense_similarity(std::span<const float> a, std::span<const float> b);

/// MaxSim from a to b: mean over a's tokens of the best cosine against b's
/// tokens, clamped to [0, 1]. 0 when either side has no tokens.
double late_interaction(const std::vector<std::vector<float>>& a,
                        const std::vector<std::vector<float>>& b);

/// Mean of both MaxSim directions.
double symmetric_late_interaction(const std::vector<std::vector<float>>& a,
                                  const std::vector<std::vector<float>>& b);

PairComponents pair_components(const EmbeddingTriple& a, const EmbeddingTriple& b,
                               double epsilon = 1e-9);

double combine(const PairComponents& c, const ScorerWeights& w);

/// Consistency of two knowledge texts in [0, 1]; 0 when either is absent.
double pair_score(std::string_view a, std::string_view b, Embedder& embedder,
                  const ScorerWeights& weights = {});

/// Thread-safe memo of pair components keyed by the two texts. Components
/// do not depend on the weights, so one cache serves a whole weight sweep.
class PairCache {
 public:
  bool lookup(std::string_view a, std::string_view b, PairComponents& out) const;
  void store(std::string_view a, std::string_view b, const PairComponents& c);
  std::size_t size() const;

 private:
  using Key = std::pair<std::uint64_t, std::uint64_t>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept { return k.first ^ (k.second * 0x9e3779b97f4a7c15ULL); }
  };
  static Key key(std::string_view a, std::string_view b);
  mutable std::mutex mu_;
  std::unordered_map<Key, PairComponents, KeyHash> map_;
};

/// s1 = (k_int, k_ext); s2 = mean over usable generated answers against
/// k_int; s3 = mean over usable passages against k_ext; s4 = mean over the
/// generated x retrieved cross product. Refusals, failed lookups and empty
/// texts are excluded; a score with nothing left to average is 0.
MatchScores score_bundle(const KnowledgeBundle& bundle, Embedder& embedder,
                         const ScorerWeights& weights = {}, PairCache* cache = nullptr);

}  // namespace trustroute
