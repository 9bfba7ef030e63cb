#include "trustroute/collector.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

#include "trustroute/parallel.hpp"
#include "trustroute/text.hpp"

namespace trustroute {

std::vector<std::string> SubQueryPlan::retrieval_queries() const {
  return {subqueries.begin(), subqueries.begin() + s_r};
}

std::vector<std::string> SubQueryPlan::generation_queries() const {
  return {subqueries.begin(), subqueries.begin() + s_g};
}

int allocation_count(double p, int n) {
  const double x = p * static_cast<double>(n);
  const double nearest = std::round(x);
  const double count = std::abs(x - nearest) < 1e-9 ? nearest : std::ceil(x);
  return std::clamp(static_cast<int>(count), 0, n);
}

std::vector<std::string> parse_subqueries(std::string_view completion, const Question& question,
                                          int n) {
  std::string_view body = completion;
  std::size_t header = std::string_view::npos;
  for (std::size_t at = text::ifind(completion, "new questions");
       at != std::string_view::npos; at = text::ifind(completion, "new questions", at + 1)) {
    header = at;
  }
  if (header != std::string_view::npos) body = completion.substr(header);
  auto items = text::parse_numbered_list(body);
  if (items.size() > static_cast<std::size_t>(n)) items.resize(static_cast<std::size_t>(n));
  while (items.size() < static_cast<std::size_t>(n)) items.push_back(question.text);
  return items;
}

std::vector<std::string> generate_subqueries(const Question& question, int n, ChatClient& llm,
                                             CallMeter& meter, const PromptSet& prompts,
                                             const GenerationSettings& settings) {
  if (n < 1) throw ContractError("number of sub-queries must be at least 1");
  const auto prompt = text::fill_template(
      prompts.subquery_generation, {{"number", std::to_string(n)}, {"question", question.text}});
  auto response = chat(llm,
                       {std::string(stage::kSubqueries), "", prompt, settings.temperature,
                        settings.max_tokens},
                       meter);
  return parse_subqueries(response.text, question, n);
}

SubQueryPlan plan_allocation(const SoftBias& bias, std::vector<std::string> subqueries, int n) {
  if (n < 1) throw ContractError("number of sub-queries must be at least 1");
  if (subqueries.size() != static_cast<std::size_t>(n)) {
    throw ContractError("plan needs exactly n sub-queries");
  }
  SubQueryPlan plan;
  plan.subqueries = std::move(subqueries);
  plan.s_r = allocation_count(bias.r_p, n);
  plan.s_g = allocation_count(bias.g_p, n);
  return plan;
}

bool RetrievalCache::lookup(const std::string& query, std::size_t top_k,
                            std::vector<RetrievedPassage>& out) const {
  std::lock_guard lock(mu_);
  auto it = map_.find({query, top_k});
  if (it == map_.end()) return false;
  out = it->second;
  return true;
}

void RetrievalCache::store(const std::string& query, std::size_t top_k,
                           const std::vector<RetrievedPassage>& hits) {
  std::lock_guard lock(mu_);
  map_.emplace(std::make_pair(query, top_k), hits);
}

CollectedKnowledge collect(const SubQueryPlan& plan, const PassageIndex* index,
                           Embedder& embedder, ChatClient& llm, CallMeter& meter,
                           const PromptSet& prompts, const CollectOptions& options) {
  const auto ret_queries = plan.retrieval_queries();
  const auto gen_queries = plan.generation_queries();
  std::vector<std::vector<RetrievedPassage>> ret_slots(ret_queries.size());
  std::vector<GeneratedAnswer> k_gen(gen_queries.size());

  const std::size_t tasks = ret_queries.size() + gen_queries.size();
  parallel_for(tasks, options.parallelism, [&](std::size_t t) {
    if (t < ret_queries.size()) {
      const auto& q = ret_queries[t];
      meter.record_retrieval();
      try {
        if (index == nullptr) throw RetrievalError("no passage index configured");
        auto* cache = options.retrieval_cache;
        if (!cache || !cache->lookup(q, options.top_k, ret_slots[t])) {
          ret_slots[t] = retrieve(*index, embedder, q, options.top_k);
          if (cache) cache->store(q, options.top_k, ret_slots[t]);
        }
      } catch (const Error& e) {
        spdlog::warn("retrieval failed for sub-query '{}': {}", q, e.what());
        ret_slots[t] = {RetrievedPassage{q, "", "", 0.0, true}};
      }
      return;
    }
    const auto g = t - ret_queries.size();
    const auto& q = gen_queries[g];
    const auto prompt = text::fill_template(prompts.multi_query_generator, {{"generated_queries", q}});
    GeneratedAnswer answer{q, "", false};
    try {
      auto response = chat(llm,
                           {std::string(stage::kGenerator), "", prompt,
                            options.generation.temperature, options.generation.max_tokens},
                           meter);
      answer.text = std::move(response.text);
      answer.refused = is_refusal_text(answer.text);
    } catch (const ProviderError& e) {
      spdlog::warn("generator failed for sub-query '{}': {}; recording a refusal", q, e.what());
      answer.text = std::string(kRefusalText);
      answer.refused = true;
    }
    k_gen[g] = std::move(answer);
  });

  CollectedKnowledge out;
  for (auto& slot : ret_slots) {
    for (auto& p : slot) out.k_ret.push_back(std::move(p));
  }
  out.k_gen = std::move(k_gen);
  return out;
}

}  // namespace trustroute
