#include "trustroute/allocator.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <regex>

#include "trustroute/text.hpp"

namespace trustroute {

using nlohmann::json;

namespace {

constexpr std::string_view kRetrieveLabel = "retrieving external knowledge";
constexpr std::string_view kDirectLabel = "answering directly";
constexpr std::string_view kAnalysisLabel = "analysis:";

std::optional<double> first_percentage(std::string_view region) {
  static const std::regex number(R"((\d+(?:\.\d+)?)\s*(%|percent)?)", std::regex::icase);
  bool first_line = true;
  for (const auto& line : text::split_lines(region)) {
    auto t = text::trim(line);
    if (!first_line && !t.empty() && t.front() == '(') continue;  // echoed instruction
    first_line = false;
    std::cmatch m;
    if (std::regex_search(t.data(), t.data() + t.size(), m, number)) {
      return std::stod(m[1].str());
    }
  }
  return std::nullopt;
}

std::optional<double> labelled_percentage(std::string_view s, std::string_view label,
                                          std::string_view other) {
  const auto at = text::ifind(s, label);
  if (at == std::string_view::npos) return std::nullopt;
  const auto start = at + label.size();
  auto stop = text::ifind(s, other, start);
  if (stop == std::string_view::npos) stop = s.size();
  return first_percentage(s.substr(start, stop - start));
}

// "Probability of" prefix of the label line, if present.
std::size_t line_start(std::string_view s, std::size_t pos) {
  auto nl = s.rfind('\n', pos == 0 ? 0 : pos - 1);
  return nl == std::string_view::npos ? 0 : nl + 1;
}

AllocationResult run_allocation(const std::string& prompt, ChatClient& llm, CallMeter& meter,
                                const GenerationSettings& settings) {
  AllocationResult result;
  ChatRequest req{std::string(stage::kAllocator), "", prompt, settings.temperature,
                  settings.max_tokens};
  for (int attempt = 1; attempt <= 2; ++attempt) {
    result.attempts = attempt;
    auto response = chat(llm, req, meter);
    result.output = parse_allocator_output(response.text);
    if (!result.output.parse_ok()) continue;
    try {
      result.bias = normalize_bias(*result.output.r_pct, *result.output.g_pct);
      result.bias.analysis = result.output.analysis;
      return result;
    } catch (const BiasParseError&) {
      continue;
    }
  }
  spdlog::warn("ParseFallback: allocator output unparsable after 2 attempts; using (0.5, 0.5)");
  result.fallback = true;
  result.bias = SoftBias{0.5, 0.5, result.output.analysis};
  return result;
}

}  // namespace

AllocatorOutput parse_allocator_output(std::string_view s) {
  AllocatorOutput out;
  out.r_pct = labelled_percentage(s, kRetrieveLabel, kDirectLabel);
  out.g_pct = labelled_percentage(s, kDirectLabel, kRetrieveLabel);

  auto first_label = std::min(text::ifind(s, kRetrieveLabel), text::ifind(s, kDirectLabel));
  std::size_t analysis_end = s.size();
  if (first_label != std::string_view::npos) analysis_end = line_start(s, first_label);
  std::size_t analysis_begin = 0;
  if (auto a = text::ifind(s, kAnalysisLabel); a != std::string_view::npos && a < analysis_end) {
    analysis_begin = a + kAnalysisLabel.size();
  }
  out.analysis = std::string(text::trim(s.substr(analysis_begin, analysis_end - analysis_begin)));
  return out;
}

std::pair<double, double> harden_to_soft(const HardBias& hard) {
  hard.validate();
  auto soften = [](int v) { return v == 1 ? 0.90 : 0.10; };
  return {soften(hard.r_p), soften(hard.g_p)};
}

HardBias hard_bias_for_scenario(Strategy label) {
  switch (label) {
    case Strategy::FA:
    case Strategy::FI: return HardBias{0, 1};
    case Strategy::FE:
    case Strategy::RA: return HardBias{1, 0};
  }
  return HardBias{1, 0};
}

std::vector<Demonstration> demonstrations_from_records(const std::vector<TrdRecord>& records) {
  std::vector<Demonstration> out;
  for (const auto& r : records) {
    if (!r.question.scenario_label) continue;
    auto [rp, gp] = harden_to_soft(hard_bias_for_scenario(*r.question.scenario_label));
    out.push_back({r.question.text, rp, gp, {}});
  }
  return out;
}

std::vector<Demonstration> select_demonstrations(const Question& question,
                                                 const std::vector<Demonstration>& train_set,
                                                 std::size_t k, Embedder& embedder) {
  if (train_set.empty()) throw AllocatorError("demonstration set is empty");
  if (k < 1) throw ContractError("k must be at least 1");
  std::vector<std::string> texts;
  texts.reserve(train_set.size() + 1);
  texts.push_back(question.text);
  for (const auto& d : train_set) texts.push_back(d.question);
  auto vecs = embedder.embed(texts);
  std::vector<double> sims(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i) sims[i] = cosine(vecs[0].dense, vecs[i + 1].dense);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
  order.resize(std::min(k, order.size()));
  std::vector<Demonstration> out;
  for (auto i : order) out.push_back(train_set[i]);
  return out;
}

std::string format_demonstrations(const std::vector<Demonstration>& demos) {
  auto pct = [](double f) { return std::to_string(static_cast<int>(std::lround(f * 100.0))) + "%"; };
  std::string out;
  for (const auto& d : demos) {
    if (!out.empty()) out += "\n";
    out += "Question: " + d.question + "\n";
    if (!d.analysis.empty()) out += "Analysis: " + d.analysis + "\n";
    out += "Probability of retrieving external knowledge: " + pct(d.r_p) + "\n";
    out += "Probability of answering directly: " + pct(d.g_p) + "\n";
  }
  return out;
}

std::vector<Demonstration> load_demonstrations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AllocatorError("cannot open demonstration store: " + path);
  std::vector<Demonstration> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      Demonstration d;
      d.question = j.at("question").get<std::string>();
      d.r_p = j.at("r_p").get<double>();
      d.g_p = j.at("g_p").get<double>();
      d.analysis = j.value("analysis", "");
      out.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw AllocatorError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_demonstrations(const std::string& path, const std::vector<Demonstration>& demos) {
  std::ofstream out(path);
  if (!out) throw AllocatorError("cannot write demonstration store: " + path);
  for (const auto& d : demos) {
    json j = {{"question", d.question}, {"r_p", d.r_p}, {"g_p", d.g_p}};
    if (!d.analysis.empty()) j["analysis"] = d.analysis;
    out << j.dump() << '\n';
  }
}

AllocationResult allocate_icl(const Question& question, const std::vector<Demonstration>& demos,
                              ChatClient& llm, CallMeter& meter, const PromptSet& prompts,
                              const GenerationSettings& settings) {
  const auto prompt = text::fill_template(
      prompts.allocator_icl,
      {{"examples", format_demonstrations(demos)}, {"question", question.text}});
  return run_allocation(prompt, llm, meter, settings);
}

AllocationResult allocate_remote(const Question& question, ChatClient& endpoint,
                                 CallMeter& meter, const PromptSet& prompts,
                                 const GenerationSettings& settings) {
  const auto prompt = text::fill_template(prompts.allocator_grpo, {{"question", question.text}});
  return run_allocation(prompt, endpoint, meter, settings);
}

double reward_direction(const AllocatorOutput& out, const HardBias& hard) {
  if (!out.parse_ok()) return 0.0;
  const double r = *out.r_pct;
  const double g = *out.g_pct;
  const bool aligned = (r > g && hard.r_p > hard.g_p) || (r < g && hard.r_p < hard.g_p);
  return aligned ? 3.0 : 0.0;
}

double reward_format(const AllocatorOutput& out) {
  return out.parse_ok() && !text::trim(out.analysis).empty() ? 1.0 : 0.0;
}

double reward_sum(const AllocatorOutput& out) {
  if (!out.parse_ok()) return 0.0;
  return std::abs(*out.r_pct + *out.g_pct - 100.0) < 1e-9 ? 1.0 : 0.0;
}

double reward_analysis(const AllocatorOutput& out, std::string_view gold_analysis,
                       Embedder& embedder) {
  if (text::trim(out.analysis).empty() || text::trim(gold_analysis).empty()) return 0.0;
  auto vecs = embedder.embed({out.analysis, std::string(gold_analysis)});
  return std::clamp(cosine(vecs[0].dense, vecs[1].dense), 0.0, 1.0);
}

double combined_reward(const AllocatorOutput& out, const HardBias& hard,
                       std::string_view gold_analysis, Embedder& embedder,
                       const RewardWeights& w) {
  return w.direction * reward_direction(out, hard) + w.format * reward_format(out) +
         w.sum * reward_sum(out) + w.analysis * reward_analysis(out, gold_analysis, embedder);
}

std::size_t select_synthesis_output(const std::vector<SynthesisCandidate>& candidates,
                                    const HardBias& hard) {
  if (candidates.empty()) throw ContractError("no synthesis candidates");
  auto rms = [&](const SynthesisCandidate& c) {
    const double dr = c.r_p - hard.r_p;
    const double dg = c.g_p - hard.g_p;
    return std::sqrt((dr * dr + dg * dg) / 2.0);
  };
  std::size_t best = 0;
  double best_loss = rms(candidates[0]);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double loss = rms(candidates[i]);
    if (loss < best_loss) {
      best = i;
      best_loss = loss;
    }
  }
  return best;
}

}  // namespace trustroute
