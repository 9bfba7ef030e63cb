#include "trustroute/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "trustroute/text.hpp"

namespace trustroute {

void ScorerWeights::validate() const {
  if (sparse < 0.0 || dense < 0.0 || late < 0.0) {
    throw ContractError("scorer weights must be non-negative");
  }
  if (sparse + dense + late <= 0.0) throw ContractError("scorer weights sum to zero");
  if (!(epsilon > 0.0)) throw ContractError("scorer epsilon must be positive");
}

ScorerWeights ScorerWeights::normalized() const {
  validate();
  const double total = sparse + dense + late;
  return {sparse / total, dense / total, late / total, epsilon};
}

double sparse_similarity(const std::map<std::string, float>& a,
                         const std::map<std::string, float>& b, double epsilon) {
  double num = 0.0;
  double den = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      den += ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      den += ib->second;
      ++ib;
    } else {
      num += std::min(ia->second, ib->second);
      den += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return std::clamp(num / std::max(den, epsilon), 0.0, 1.0);
}

double dense_similarity(std::span<const float> a, std::span<const float> b) {
  return std::clamp((1.0 + cosine(a, b)) / 2.0, 0.0, 1.0);
}

double late_interaction(const std::vector<std::vector<float>>& a,
                        const std::vector<std::vector<float>>& b) {
  if (a.empty() || b.empty()) return 0.0;
  double total = 0.0;
  for (const auto& qa : a) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& db : b) best = std::max(best, cosine(qa, db));
    total += best;
  }
  return std::clamp(total / static_cast<double>(a.size()), 0.0, 1.0);
}

double symmetric_late_interaction(const std::vector<std::vector<float>>& a,
                                  const std::vector<std::vector<float>>& b) {
  return (late_interaction(a, b) + late_interaction(b, a)) / 2.0;
}

PairComponents pair_components(const EmbeddingTriple& a, const EmbeddingTriple& b,
                               double epsilon) {
  return {sparse_similarity(a.sparse, b.sparse, epsilon), dense_similarity(a.dense, b.dense),
          symmetric_late_interaction(a.token_vectors, b.token_vectors)};
}

double combine(const PairComponents& c, const ScorerWeights& w) {
  const double total = w.sparse + w.dense + w.late;
  if (total <= 0.0) return 0.0;
  const double s = (w.sparse * c.sparse + w.dense * c.dense + w.late * c.late) / total;
  return std::clamp(s, 0.0, 1.0);
}

double pair_score(std::string_view a, std::string_view b, Embedder& embedder,
                  const ScorerWeights& weights) {
  weights.validate();
  if (is_empty_knowledge(a) || is_empty_knowledge(b)) return 0.0;
  auto vecs = embedder.embed({std::string(a), std::string(b)});
  return combine(pair_components(vecs[0], vecs[1], weights.epsilon), weights);
}

PairCache::Key PairCache::key(std::string_view a, std::string_view b) {
  auto ha = text::fnv1a64(a);
  auto hb = text::fnv1a64(b);
  if (hb < ha) std::swap(ha, hb);
  return {ha, hb};
}

bool PairCache::lookup(std::string_view a, std::string_view b, PairComponents& out) const {
  std::lock_guard lock(mu_);
  auto it = map_.find(key(a, b));
  if (it == map_.end()) return false;
  out = it->second;
  return true;
}

void PairCache::store(std::string_view a, std::string_view b, const PairComponents& c) {
  std::lock_guard lock(mu_);
  map_.emplace(key(a, b), c);
}

std::size_t PairCache::size() const {
  std::lock_guard lock(mu_);
  return map_.size();
}

MatchScores score_bundle(const KnowledgeBundle& bundle, Embedder& embedder,
                         const ScorerWeights& weights, PairCache* cache) {
  weights.validate();
  const bool has_int = !is_empty_knowledge(bundle.k_int);
  const bool has_ext = !is_empty_knowledge(bundle.k_ext);
  std::vector<const std::string*> gen;
  for (const auto& g : bundle.k_gen) {
    if (!g.refused && !is_empty_knowledge(g.text)) gen.push_back(&g.text);
  }
  std::vector<const std::string*> ret;
  for (const auto& r : bundle.k_ret) {
    if (!r.failed && !is_empty_knowledge(r.text)) ret.push_back(&r.text);
  }

  // Embed every distinct text once.
  std::unordered_map<std::string_view, std::size_t> slot;
  std::vector<std::string> texts;
  auto want = [&](const std::string& s) {
    if (slot.emplace(s, texts.size()).second) texts.push_back(s);
  };
  if (has_int) want(bundle.k_int);
  if (has_ext) want(bundle.k_ext);
  for (auto* g : gen) want(*g);
  for (auto* r : ret) want(*r);

  MatchScores scores;
  if (texts.empty()) return scores;

  std::vector<EmbeddingTriple> vecs;
  bool embedded = false;
  auto ensure_embedded = [&] {
    if (!embedded) {
      vecs = embedder.embed(texts);
      embedded = true;
    }
  };
  auto components = [&](const std::string& a, const std::string& b) {
    PairComponents c;
    if (cache && cache->lookup(a, b, c)) return c;
    ensure_embedded();
    c = pair_components(vecs[slot.at(a)], vecs[slot.at(b)], weights.epsilon);
    if (cache) cache->store(a, b, c);
    return c;
  };
  auto score = [&](const std::string& a, const std::string& b) {
    return combine(components(a, b), weights);
  };

  if (has_int && has_ext) scores.s1 = score(bundle.k_int, bundle.k_ext);
  if (has_int && !gen.empty()) {
    double sum = 0.0;
    for (auto* g : gen) sum += score(*g, bundle.k_int);
    scores.s2 = sum / static_cast<double>(gen.size());
  }
  if (has_ext && !ret.empty()) {
    double sum = 0.0;
    for (auto* r : ret) sum += score(*r, bundle.k_ext);
    scores.s3 = sum / static_cast<double>(ret.size());
  }
  if (!gen.empty() && !ret.empty()) {
    double sum = 0.0;
    for (auto* g : gen) {
      for (auto* r : ret) sum += score(*g, *r);
    }
    scores.s4 = sum / static_cast<double>(gen.size() * ret.size());
  }
  scores.s1 = std::clamp(scores.s1, 0.0, 1.0);
  scores.s2 = std::clamp(scores.s2, 0.0, 1.0);
  scores.s3 = std::clamp(scores.s3, 0.0, 1.0);
  scores.s4 = std::clamp(scores.s4, 0.0, 1.0);
  return scores;
}

}  // namespace trustroute
