#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trustroute/allocator.hpp"
#include "trustroute/collector.hpp"
#include "trustroute/decision.hpp"
#include "trustroute/model.hpp"
#include "trustroute/prompts.hpp"
#include "trustroute/providers/chat.hpp"
#include "trustroute/providers/embedding.hpp"
#include "trustroute/providers/index.hpp"
#include "trustroute/scorer.hpp"

namespace trustroute {

enum class AllocatorMode : std::uint8_t { Icl, Remote };

std::string_view to_string(AllocatorMode m);
AllocatorMode allocator_mode_from_string(std::string_view s);

struct PipelineConfig {
  int subqueries = kDefaultSubqueries;
  std::size_t demonstrations = kDefaultDemonstrations;
  std::size_t top_k = 1;
  ScorerWeights weights;
  Thresholds thresholds;
  AllocatorMode allocator_mode = AllocatorMode::Icl;
  std::size_t parallelism = 1;  // concurrent lookups/generations within one question
  GenerationSettings generation;

  /// Throws ContractError on any out-of-range field.
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& config);
/// Missing keys keep their defaults.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

/// Borrowed providers. `llm` and `embedder` are required; `allocator`
/// defaults to `llm`; `index` may be null, in which case every lookup is a
/// flagged failure.
struct Providers {
  ChatClient* llm = nullptr;
  ChatClient* allocator = nullptr;
  Embedder* embedder = nullptr;
  const PassageIndex* index = nullptr;
  const std::vector<Demonstration>* demonstrations = nullptr;
  const PromptSet* prompts = nullptr;  // null -> default_prompts()
  PairCache* pair_cache = nullptr;
  RetrievalCache* retrieval_cache = nullptr;
};

struct PipelineInput {
  Question question;
  std::string k_int;
  std::string k_ext;

  static PipelineInput from_record(const TrdRecord& record);
};

struct CycleRecord {
  std::vector<std::string> subqueries;
  int s_r = 0;
  int s_g = 0;
  std::vector<GeneratedAnswer> k_gen;
  std::vector<RetrievedPassage> k_ret;
  MatchScores scores;
  TrustScores trust;
  Outcome outcome = Outcome::RA;
  std::vector<RuleFiring> trace;
};

/// Everything one question's run produced.
struct RunRecord {
  std::string id;
  std::string question;
  SoftBias bias;
  bool bias_fallback = false;
  int allocator_attempts = 0;
  std::vector<CycleRecord> cycles;
  Decision decision;
  std::string answer;
  std::optional<char> answer_option;
  bool refused = false;
  int responder_attempts = 0;
  std::optional<Strategy> gold_strategy;
  std::optional<char> correct_option;
  MeterSnapshot calls;
  double wall_ms = 0.0;
  std::vector<std::string> events;

  bool reflected() const { return decision.reflections_used > 0; }
};

/// The structured run record. `include_timing` false drops wall_ms, which is
/// the only field that differs between identical mock runs.
nlohmann::json to_json(const RunRecord& record, bool include_timing = true);

/// Knowledge text handed to the responder for a strategy. RA has none.
std::string knowledge_for_strategy(Strategy strategy, const KnowledgeBundle& bundle);

/// Finds "Correct Option: X" naming one of the question's letters.
std::optional<char> parse_correct_option(std::string_view completion, const Question& question);

struct ReflectResult {
  std::vector<std::string> subqueries;
  bool parsed = false;  // false: previous sub-queries are reused
};

/// One reflection call over the question and the four knowledge sources.
ReflectResult reflect(const Question& question, const KnowledgeBundle& bundle,
                      const std::vector<std::string>& previous, int n, ChatClient& llm,
                      CallMeter& meter, const PromptSet& prompts,
                      const GenerationSettings& settings = {});

/// allocate -> sub-queries -> (collect -> score -> decide)+ -> respond.
/// The bias is computed once and the allocation counts stay fixed across
/// reflection cycles. Provider failures other than generator failures
/// propagate as ProviderError.
RunRecord run(const PipelineInput& input, const PipelineConfig& config, const Providers& providers);

}  // namespace trustroute
