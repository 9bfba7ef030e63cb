#include "trustroute/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <regex>

#include "trustroute/text.hpp"

namespace trustroute {

using nlohmann::json;

std::string_view to_string(AllocatorMode m) { return m == AllocatorMode::Icl ? "icl" : "remote"; }

AllocatorMode allocator_mode_from_string(std::string_view s) {
  if (text::iequals(s, "icl")) return AllocatorMode::Icl;
  if (text::iequals(s, "remote") || text::iequals(s, "grpo")) return AllocatorMode::Remote;
  throw ConfigError("unknown allocator mode: " + std::string(s));
}

void PipelineConfig::validate() const {
  if (subqueries < 1) throw ContractError("subqueries must be at least 1");
  if (demonstrations < 1) throw ContractError("demonstrations must be at least 1");
  if (top_k < 1) throw ContractError("top_k must be at least 1");
  if (parallelism < 1) throw ContractError("parallelism must be at least 1");
  if (generation.max_tokens < 1) throw ContractError("max_tokens must be at least 1");
  weights.validate();
  thresholds.validate();
}

json to_json(const PipelineConfig& c) {
  return {{"subqueries", c.subqueries},
          {"demonstrations", c.demonstrations},
          {"top_k", c.top_k},
          {"weights", {{"sparse", c.weights.sparse}, {"dense", c.weights.dense}, {"late", c.weights.late}}},
          {"epsilon", c.weights.epsilon},
          {"alpha", c.thresholds.alpha},
          {"beta", c.thresholds.beta},
          {"max_reflections", c.thresholds.max_reflections},
          {"allocator_mode", std::string(to_string(c.allocator_mode))},
          {"parallelism", c.parallelism},
          {"temperature", c.generation.temperature},
          {"max_tokens", c.generation.max_tokens}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  if (!j.is_object()) throw ConfigError("pipeline settings must be an object");
  try {
    c.subqueries = j.value("subqueries", c.subqueries);
    c.demonstrations = j.value("demonstrations", c.demonstrations);
    c.top_k = j.value("top_k", c.top_k);
    if (auto w = j.find("weights"); w != j.end()) {
      if (w->is_array()) {
        if (w->size() != 3) throw ConfigError("weights must have three entries");
        c.weights.sparse = (*w)[0].get<double>();
        c.weights.dense = (*w)[1].get<double>();
        c.weights.late = (*w)[2].get<double>();
      } else {
        c.weights.sparse = w->value("sparse", c.weights.sparse);
        c.weights.dense = w->value("dense", c.weights.dense);
        c.weights.late = w->value("late", c.weights.late);
      }
    }
    c.weights.epsilon = j.value("epsilon", c.weights.epsilon);
    c.thresholds.alpha = j.value("alpha", c.thresholds.alpha);
    c.thresholds.beta = j.value("beta", c.thresholds.beta);
    c.thresholds.max_reflections = j.value("max_reflections", c.thresholds.max_reflections);
    if (auto m = j.find("allocator_mode"); m != j.end()) {
      c.allocator_mode = allocator_mode_from_string(m->get<std::string>());
    }
    c.parallelism = j.value("parallelism", c.parallelism);
    c.generation.temperature = j.value("temperature", c.generation.temperature);
    c.generation.max_tokens = j.value("max_tokens", c.generation.max_tokens);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid pipeline settings: ") + e.what());
  }
  try {
    c.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

PipelineInput PipelineInput::from_record(const TrdRecord& record) {
  return {record.question, record.internal_knowledge, record.external_knowledge};
}

namespace {

json trace_json(const std::vector<RuleFiring>& trace) {
  json out = json::array();
  for (const auto& f : trace) out.push_back({{"rule", f.rule}, {"detail", f.detail}});
  return out;
}

json scores_json(const MatchScores& s) {
  return {{"s1", s.s1}, {"s2", s.s2}, {"s3", s.s3}, {"s4", s.s4}};
}

json opt_letter(const std::optional<char>& c) {
  return c ? json(std::string(1, *c)) : json();
}

std::string join_generated(const std::vector<GeneratedAnswer>& k_gen, bool usable_only) {
  std::string out;
  for (const auto& g : k_gen) {
    if (usable_only && (g.refused || is_empty_knowledge(g.text))) continue;
    if (!out.empty()) out += "\n";
    out += text::trim(g.text);
  }
  return out.empty() ? "None" : out;
}

std::string join_retrieved(const std::vector<RetrievedPassage>& k_ret) {
  std::string out;
  for (const auto& r : k_ret) {
    if (r.failed || is_empty_knowledge(r.text)) continue;
    if (!out.empty()) out += "\n";
    out += text::trim(r.text);
  }
  return out.empty() ? "None" : out;
}

std::string or_none(std::string_view s) {
  return is_empty_knowledge(s) ? "None" : std::string(text::trim(s));
}

}  // namespace

json to_json(const RunRecord& r, bool include_timing) {
  json cycles = json::array();
  for (const auto& c : r.cycles) {
    json gen = json::array();
    for (const auto& g : c.k_gen) {
      gen.push_back({{"subquery", g.subquery}, {"text", g.text}, {"refused", g.refused}});
    }
    json ret = json::array();
    for (const auto& p : c.k_ret) {
      ret.push_back({{"subquery", p.subquery},
                     {"chunk_id", p.chunk_id},
                     {"text", p.text},
                     {"score", p.score},
                     {"failed", p.failed}});
    }
    cycles.push_back({{"subqueries", c.subqueries},
                      {"s_r", c.s_r},
                      {"s_g", c.s_g},
                      {"k_gen", gen},
                      {"k_ret", ret},
                      {"scores", scores_json(c.scores)},
                      {"t_ret", c.trust.t_ret},
                      {"t_llm", c.trust.t_llm},
                      {"outcome", std::string(to_string(c.outcome))},
                      {"trace", trace_json(c.trace)}});
  }
  json j{{"id", r.id},
         {"question", r.question},
         {"bias",
          {{"r_p", r.bias.r_p},
           {"g_p", r.bias.g_p},
           {"analysis", r.bias.analysis},
           {"fallback", r.bias_fallback},
           {"attempts", r.allocator_attempts}}},
         {"cycles", cycles},
         {"decision",
          {{"strategy", std::string(to_string(r.decision.strategy))},
           {"t_ret", r.decision.t_ret},
           {"t_llm", r.decision.t_llm},
           {"reflections_used", r.decision.reflections_used},
           {"trace", trace_json(r.decision.trace)}}},
         {"strategy", std::string(to_string(r.decision.strategy))},
         {"answer", r.answer},
         {"answer_option", opt_letter(r.answer_option)},
         {"refused", r.refused},
         {"responder_attempts", r.responder_attempts},
         {"gold",
          {{"strategy", r.gold_strategy ? json(std::string(to_string(*r.gold_strategy))) : json()},
           {"correct_option", opt_letter(r.correct_option)}}},
         {"calls",
          {{"llm", r.calls.llm_calls}, {"retrievals", r.calls.retrievals}, {"by_stage", r.calls.by_stage}}},
         {"events", r.events}};
  if (include_timing) j["wall_ms"] = r.wall_ms;
  return j;
}

std::string knowledge_for_strategy(Strategy strategy, const KnowledgeBundle& b) {
  const auto internal = "Internal knowledge: " + or_none(b.k_int);
  const auto external = "External knowledge: " + or_none(b.k_ext);
  const auto generated = "Generated knowledge: " + join_generated(b.k_gen, true);
  const auto retrieved = "Retrieved knowledge: " + join_retrieved(b.k_ret);
  switch (strategy) {
    case Strategy::FA: return internal + "\n" + external + "\n" + generated + "\n" + retrieved;
    case Strategy::FI: return internal + "\n" + generated;
    case Strategy::FE: return external + "\n" + retrieved;
    case Strategy::RA: return "";
  }
  return "";
}

std::optional<char> parse_correct_option(std::string_view completion, const Question& question) {
  static const std::regex re(R"(correct\s+option\s*(?::|：)?[\s\[(*"']*([A-Za-z])\b)",
                             std::regex::icase);
  const std::string s(completion);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
    const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>((*it)[1].str()[0])));
    if (question.find_option(letter)) return letter;
  }
  return std::nullopt;
}

ReflectResult reflect(const Question& question, const KnowledgeBundle& bundle,
                      const std::vector<std::string>& previous, int n, ChatClient& llm,
                      CallMeter& meter, const PromptSet& prompts,
                      const GenerationSettings& settings) {
  const auto prompt = text::fill_template(
      prompts.reflection, {{"question", question.text},
                           {"internal_knowledge", or_none(bundle.k_int)},
                           {"external_knowledge", or_none(bundle.k_ext)},
                           {"generated_knowledge", join_generated(bundle.k_gen, false)},
                           {"retrieved_knowledge", join_retrieved(bundle.k_ret)},
                           {"number", std::to_string(n)}});
  auto response = chat(llm,
                       {std::string(stage::kReflection), "", prompt, settings.temperature,
                        settings.max_tokens},
                       meter);
  ReflectResult out;
  std::string_view body = response.text;
  std::size_t header = std::string_view::npos;
  for (auto at = text::ifind(body, "new questions"); at != std::string_view::npos;
       at = text::ifind(body, "new questions", at + 1)) {
    header = at;
  }
  if (header == std::string_view::npos || text::parse_numbered_list(body.substr(header)).empty()) {
    out.subqueries = previous;
    return out;
  }
  out.subqueries = parse_subqueries(body, question, n);
  out.parsed = true;
  return out;
}

RunRecord run(const PipelineInput& input, const PipelineConfig& config, const Providers& providers) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  if (providers.llm == nullptr || providers.embedder == nullptr) {
    throw ContractError("pipeline needs an llm and an embedder");
  }
  input.question.validate();
  const PromptSet fallback_prompts = providers.prompts ? PromptSet{} : default_prompts();
  const PromptSet& prompts = providers.prompts ? *providers.prompts : fallback_prompts;
  ChatClient& llm = *providers.llm;
  ChatClient& allocator_llm = providers.allocator ? *providers.allocator : llm;
  Embedder& embedder = *providers.embedder;
  const Question& q = input.question;
  const int n = config.subqueries;

  CallMeter meter;
  RunRecord rec;
  rec.id = q.id;
  rec.question = q.text;
  rec.gold_strategy = q.scenario_label;
  rec.correct_option = q.correct_option;

  AllocationResult alloc;
  if (config.allocator_mode == AllocatorMode::Remote) {
    alloc = allocate_remote(q, allocator_llm, meter, prompts, config.generation);
  } else {
    std::vector<Demonstration> demos;
    if (providers.demonstrations && !providers.demonstrations->empty()) {
      demos = select_demonstrations(q, *providers.demonstrations, config.demonstrations, embedder);
    }
    alloc = allocate_icl(q, demos, allocator_llm, meter, prompts, config.generation);
  }
  rec.bias = alloc.bias;
  rec.bias_fallback = alloc.fallback;
  rec.allocator_attempts = alloc.attempts;
  if (alloc.fallback) rec.events.push_back("ParseFallback: allocator output unparsable; bias (0.5, 0.5)");

  auto subqueries = generate_subqueries(q, n, llm, meter, prompts, config.generation);
  CollectOptions copts{config.top_k, config.parallelism, config.generation, providers.retrieval_cache};

  KnowledgeBundle bundle{input.k_int, input.k_ext, {}, {}};
  int reflections = 0;
  Verdict verdict;
  while (true) {
    auto plan = plan_allocation(rec.bias, subqueries, n);
    auto collected = collect(plan, providers.index, embedder, llm, meter, prompts, copts);
    bundle.k_gen = std::move(collected.k_gen);
    bundle.k_ret = std::move(collected.k_ret);
    const auto scores = score_bundle(bundle, embedder, config.weights, providers.pair_cache);
    verdict = decide(rec.bias, scores, config.thresholds, reflections);

    CycleRecord cycle{plan.subqueries, plan.s_r, plan.s_g, bundle.k_gen, bundle.k_ret,
                      scores, verdict.trust, verdict.outcome, verdict.trace};
    rec.cycles.push_back(std::move(cycle));
    if (verdict.outcome != Outcome::Reflect) break;

    auto reflected = reflect(q, bundle, subqueries, n, llm, meter, prompts, config.generation);
    ++reflections;
    if (!reflected.parsed) {
      rec.events.push_back("ReflectionParseFailure: cycle " + std::to_string(reflections) +
                           " reuses the previous sub-queries");
    }
    subqueries = std::move(reflected.subqueries);
  }

  Decision& d = rec.decision;
  d.strategy = to_strategy(verdict.outcome);
  d.t_ret = verdict.trust.t_ret;
  d.t_llm = verdict.trust.t_llm;
  d.reflections_used = reflections;
  for (const auto& c : rec.cycles) d.trace.insert(d.trace.end(), c.trace.begin(), c.trace.end());

  auto refuse = [&] {
    rec.answer_option = q.refusal_option();
    rec.answer = std::string(kRefusalText);
    rec.refused = true;
  };

  if (d.strategy == Strategy::RA) {
    refuse();
  } else {
    const auto knowledge = knowledge_for_strategy(d.strategy, bundle);
    const bool closed = !q.options.empty();
    const auto prompt = closed ? text::fill_template(prompts.responder, {{"knowledge", knowledge},
                                                                         {"question", q.text},
                                                                         {"options", format_options(q.options)}})
                               : text::fill_template(prompts.responder_open,
                                                     {{"knowledge", knowledge}, {"question", q.text}});
    const ChatRequest req{std::string(stage::kResponder), "", prompt, config.generation.temperature,
                          config.generation.max_tokens};
    bool answered = false;
    for (int attempt = 1; attempt <= 2 && !answered; ++attempt) {
      rec.responder_attempts = attempt;
      auto response = chat(llm, req, meter);
      if (closed) {
        if (auto letter = parse_correct_option(response.text, q)) {
          rec.answer_option = letter;
          rec.answer = q.find_option(*letter)->text;
          answered = true;
        }
      } else if (auto t = text::trim(response.text); !t.empty()) {
        rec.answer = std::string(t);
        answered = true;
      }
    }
    if (!answered) {
      spdlog::warn("responder output unparsable for question '{}'; refusing", q.id);
      rec.events.push_back("ResponderParseFailure: answered with a refusal");
      refuse();
    } else {
      rec.refused = (rec.answer_option && rec.answer_option == q.refusal_option()) ||
                    is_refusal_text(rec.answer);
    }
  }

  rec.calls = meter.snapshot();
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

}  // namespace trustroute
