#pragma once

#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "trustroute/model.hpp"
#include "trustroute/prompts.hpp"
#include "trustroute/providers/chat.hpp"
#include "trustroute/providers/embedding.hpp"
#include "trustroute/providers/index.hpp"

namespace trustroute {

inline constexpr int kDefaultSubqueries = 10;

/// Ranked sub-queries and how many of them each source consumes. Both
/// sources take prefixes of the same list, so they overlap on the
/// top-ranked probes whenever s_r + s_g > n.
struct SubQueryPlan {
  std::vector<std::string> subqueries;
  int s_r = 0;
  int s_g = 0;

  std::vector<std::string> retrieval_queries() const;
  std::vector<std::string> generation_queries() const;
};

/// ceil(p * n), robust to representation error in p * n, clamped to [0, n].
int allocation_count(double p, int n);

/// Numbered items of a completion (after its last "New questions:" header
/// when present), truncated to n and padded with the question text.
std::vector<std::string> parse_subqueries(std::string_view completion, const Question& question,
                                          int n);

std::vector<std::string> generate_subqueries(const Question& question, int n, ChatClient& llm,
                                             CallMeter& meter, const PromptSet& prompts,
                                             const GenerationSettings& settings = {});

/// Throws ContractError unless |subqueries| == n and n >= 1.
SubQueryPlan plan_allocation(const SoftBias& bias, std::vector<std::string> subqueries, int n);

/// Memo of index lookups keyed by (query, top_k). Thread-safe.
class RetrievalCache {
 public:
  bool lookup(const std::string& query, std::size_t top_k, std::vector<RetrievedPassage>& out) const;
  void store(const std::string& query, std::size_t top_k, const std::vector<RetrievedPassage>& hits);

 private:
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::size_t>, std::vector<RetrievedPassage>> map_;
};

struct CollectOptions {
  std::size_t top_k = 1;
  std::size_t parallelism = 1;
  GenerationSettings generation;
  RetrievalCache* retrieval_cache = nullptr;  // must only ever see one index
};

struct CollectedKnowledge {
  std::vector<RetrievedPassage> k_ret;
  std::vector<GeneratedAnswer> k_gen;
};

/// Retrieves for the first s_r sub-queries and asks the generator the first
/// s_g. A failed lookup (or a missing index) yields an empty passage
/// flagged `failed`; a generator transport failure is recorded as a
/// refusal. Results keep plan order regardless of parallelism.
CollectedKnowledge collect(const SubQueryPlan& plan, const PassageIndex* index,
                           Embedder& embedder, ChatClient& llm, CallMeter& meter,
                           const PromptSet& prompts, const CollectOptions& options = {});

}  // namespace trustroute
