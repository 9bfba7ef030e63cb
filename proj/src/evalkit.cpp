#include "trustroute/evalkit.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include "trustroute/parallel.hpp"
#include "trustroute/text.hpp"

namespace trustroute {

using nlohmann::json;

namespace {

std::size_t slot(Strategy s) { return static_cast<std::size_t>(s); }

void check_sizes(const std::vector<TrdRecord>& records, const std::vector<Answer>& answers) {
  if (records.empty()) throw ContractError("metric over an empty dataset is undefined");
  if (records.size() != answers.size()) throw ContractError("records and answers differ in size");
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

}  // namespace

Answer answer_of(const RunRecord& run) { return {run.answer_option, run.answer}; }

std::vector<std::string> gold_answers(const TrdRecord& r) {
  std::vector<std::string> out;
  auto add = [&](const std::string& s) {
    if (!text::trim(s).empty()) out.push_back(s);
  };
  if (!r.question.scenario_label) {
    add(r.internal_answer);
    add(r.external_answer);
    return out;
  }
  switch (*r.question.scenario_label) {
    case Strategy::FA:
      add(r.internal_answer);
      add(r.external_answer);
      break;
    case Strategy::FI: add(r.internal_answer); break;
    case Strategy::FE: add(r.external_answer); break;
    case Strategy::RA: out.emplace_back(kRefusalText); break;
  }
  return out;
}

bool is_refusal_answer(const Question& q, const Answer& a) {
  if (a.option) {
    const auto refusal = q.refusal_option();
    if (refusal && *refusal == *a.option) return true;
  }
  return is_refusal_text(a.text);
}

bool is_correct(const TrdRecord& r, const Answer& a) {
  if (r.question.correct_option) return a.option && *a.option == *r.question.correct_option;
  if (!r.question.options.empty()) return false;
  const auto golds = gold_answers(r);
  return !golds.empty() && exact_match(a.text, golds) == 1;
}

double accuracy(const std::vector<TrdRecord>& records, const std::vector<Answer>& answers) {
  check_sizes(records, answers);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < records.size(); ++i) hits += is_correct(records[i], answers[i]) ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(records.size());
}

double refusal_rate(const std::vector<TrdRecord>& records, const std::vector<Answer>& answers) {
  check_sizes(records, answers);
  std::size_t refusals = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    refusals += is_refusal_answer(records[i].question, answers[i]) ? 1 : 0;
  }
  return 100.0 * static_cast<double>(refusals) / static_cast<double>(records.size());
}

std::string normalize_answer(std::string_view s) {
  std::string lowered;
  lowered.reserve(s.size());
  for (unsigned char c : s) {
    if (c < 0x80 && std::ispunct(c)) continue;
    lowered.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
  }
  // Articles are removed where they stand as whole words.
  std::string no_articles;
  const std::size_t n = lowered.size();
  for (std::size_t i = 0; i < n;) {
    const bool at_start = i == 0 || !is_word_byte(static_cast<unsigned char>(lowered[i - 1]));
    if (at_start) {
      std::size_t len = 0;
      for (std::string_view art : {"the", "an", "a"}) {
        if (lowered.compare(i, art.size(), art) == 0 &&
            (i + art.size() == n || !is_word_byte(static_cast<unsigned char>(lowered[i + art.size()])))) {
          len = art.size();
          break;
        }
      }
      if (len > 0) {
        no_articles.push_back(' ');
        i += len;
        continue;
      }
    }
    no_articles.push_back(lowered[i++]);
  }
  std::string out;
  for (const auto& tok : text::split_whitespace(no_articles)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

int exact_match(std::string_view prediction, const std::vector<std::string>& golds) {
  const auto p = normalize_answer(prediction);
  for (const auto& g : golds) {
    if (normalize_answer(g) == p) return 1;
  }
  return 0;
}

double efficiency(double accuracy_pct, double avg_calls) {
  if (!(avg_calls > 0.0)) throw ContractError("average call count must be positive");
  return accuracy_pct / avg_calls;
}

std::optional<double> ScenarioReport::accuracy(Strategy s) const {
  const auto n = counts[slot(s)];
  if (n == 0) return std::nullopt;
  return 100.0 * static_cast<double>(correct[slot(s)]) / static_cast<double>(n);
}

json ScenarioReport::to_json() const {
  json per = json::object();
  json matrix_json = json::object();
  for (Strategy gold : kAllStrategies) {
    const std::string g(trustroute::to_string(gold));
    const auto acc = accuracy(gold);
    per[g] = {{"count", counts[slot(gold)]},
              {"correct", correct[slot(gold)]},
              {"accuracy", acc ? json(*acc) : json()}};
    json row = json::object();
    for (Strategy pred : kAllStrategies) {
      row[std::string(trustroute::to_string(pred))] = matrix[slot(gold)][slot(pred)];
    }
    matrix_json[g] = row;
  }
  return {{"per_scenario", per}, {"confusion", matrix_json}, {"unlabeled", unlabeled}};
}

std::string ScenarioReport::to_csv() const {
  std::ostringstream out;
  out << "gold\\predicted";
  for (Strategy pred : kAllStrategies) out << ',' << trustroute::to_string(pred);
  out << '\n';
  for (Strategy gold : kAllStrategies) {
    out << trustroute::to_string(gold);
    for (Strategy pred : kAllStrategies) out << ',' << matrix[slot(gold)][slot(pred)];
    out << '\n';
  }
  return out.str();
}

ScenarioReport scenario_report(const std::vector<TrdRecord>& records,
                               const std::vector<std::optional<Strategy>>& decisions) {
  if (records.size() != decisions.size()) throw ContractError("records and decisions differ in size");
  ScenarioReport rep;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& gold = records[i].question.scenario_label;
    if (!gold || !decisions[i]) {
      ++rep.unlabeled;
      continue;
    }
    ++rep.counts[slot(*gold)];
    ++rep.matrix[slot(*gold)][slot(*decisions[i])];
    if (*gold == *decisions[i]) ++rep.correct[slot(*gold)];
  }
  return rep;
}

json EvalReport::to_json(bool include_runs, bool include_timing) const {
  json j{{"complete", complete},
         {"total", total},
         {"completed", completed},
         {"failed", failed},
         {"accuracy", accuracy},
         {"refusal_rate", refusal_rate},
         {"exact_match", exact_match ? json(*exact_match) : json()},
         {"avg_calls", avg_calls},
         {"llm_calls", llm_calls},
         {"efficiency", efficiency ? json(*efficiency) : json()},
         {"reflection_rate", reflection_rate},
         {"scenarios", scenarios.to_json()}};
  if (include_runs) {
    json runs = json::array();
    for (const auto& r : results) {
      if (r.run) {
        auto rj = trustroute::to_json(*r.run, include_timing);
        if (!r.error.empty()) rj["error"] = r.error;
        runs.push_back(std::move(rj));
      } else if (!r.error.empty()) {
        runs.push_back({{"error", r.error}});
      }
    }
    j["runs"] = std::move(runs);
  }
  return j;
}

EvalReport evaluate(const std::vector<TrdRecord>& records, const PipelineConfig& config,
                    const Providers& providers, const EvalOptions& options) {
  if (records.empty()) throw ContractError("cannot evaluate an empty dataset");
  config.validate();
  EvalReport rep;
  rep.total = records.size();
  rep.results.resize(records.size());
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;

  parallel_for(records.size(), options.workers, [&](std::size_t i) {
    if (options.cancel && options.cancel->load()) return;
    auto& slot_result = rep.results[i];
    try {
      slot_result.run = run(PipelineInput::from_record(records[i]), config, providers);
    } catch (const std::exception& e) {
      spdlog::error("question '{}' failed: {}", records[i].question.id, e.what());
      RunRecord failed;
      failed.id = records[i].question.id;
      failed.question = records[i].question.text;
      failed.gold_strategy = records[i].question.scenario_label;
      failed.correct_option = records[i].question.correct_option;
      failed.events.push_back(std::string("Error: ") + e.what());
      slot_result.run = std::move(failed);
      slot_result.error = e.what();
    }
    const auto finished = done.fetch_add(1) + 1;
    if (options.progress) {
      std::lock_guard lock(progress_mu);
      options.progress(finished, records.size());
    }
  });

  std::vector<TrdRecord> ran;
  std::vector<Answer> answers;
  std::vector<std::optional<Strategy>> decisions;
  std::size_t reflected = 0;
  double em_sum = 0.0;
  std::size_t em_n = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& res = rep.results[i];
    if (!res.run) continue;
    ++rep.completed;
    const bool ok = res.error.empty();
    if (!ok) ++rep.failed;
    ran.push_back(records[i]);
    answers.push_back(ok ? answer_of(*res.run) : Answer{});
    decisions.push_back(ok ? std::optional<Strategy>(res.run->decision.strategy) : std::nullopt);
    rep.llm_calls += res.run->calls.llm_calls;
    if (ok && res.run->reflected()) ++reflected;
    if (records[i].question.options.empty()) {
      const auto golds = gold_answers(records[i]);
      if (!golds.empty()) {
        em_sum += ok ? exact_match(res.run->answer, golds) : 0;
        ++em_n;
      }
    }
  }
  rep.complete = rep.completed == rep.total;
  if (ran.empty()) return rep;

  rep.accuracy = accuracy(ran, answers);
  rep.refusal_rate = refusal_rate(ran, answers);
  if (em_n > 0) rep.exact_match = 100.0 * em_sum / static_cast<double>(em_n);
  rep.avg_calls = static_cast<double>(rep.llm_calls) / static_cast<double>(ran.size());
  if (rep.avg_calls > 0.0) rep.efficiency = efficiency(rep.accuracy, rep.avg_calls);
  rep.reflection_rate = 100.0 * static_cast<double>(reflected) / static_cast<double>(ran.size());
  rep.scenarios = scenario_report(ran, decisions);
  return rep;
}

std::vector<double> range_grid(double lo, double hi, double step) {
  if (!(step > 0.0)) throw ContractError("grid step must be positive");
  if (hi < lo) throw ContractError("grid upper bound below lower bound");
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double v = lo + step * i;
    if (v > hi + 1e-9) break;
    out.push_back(std::round(v * 1e9) / 1e9);
  }
  return out;
}

WeightGrid sweep_weight_grid(double step) {
  auto axis = range_grid(0.1, 1.0, step);
  return {axis, axis, axis};
}

ThresholdGrid sweep_threshold_grid(double step) {
  auto axis = range_grid(0.1, 2.0, step);
  return {axis, axis};
}

std::vector<ScorerWeights> expand_weight_grid(const WeightGrid& grid) {
  if (grid.sparse.empty() || grid.dense.empty() || grid.late.empty()) {
    throw ContractError("weight grid has an empty axis");
  }
  std::map<std::tuple<long long, long long, long long>, ScorerWeights> unique;
  for (double s : grid.sparse) {
    for (double d : grid.dense) {
      for (double l : grid.late) {
        if (s < 0.0 || d < 0.0 || l < 0.0) throw ContractError("weights must be non-negative");
        const double total = s + d + l;
        if (total <= 0.0) continue;
        ScorerWeights w{s / total, d / total, l / total};
        auto key = std::make_tuple(std::llround(w.sparse * 1e9), std::llround(w.dense * 1e9),
                                   std::llround(w.late * 1e9));
        unique.emplace(key, w);
      }
    }
  }
  std::vector<ScorerWeights> out;
  out.reserve(unique.size());
  for (auto& [key, w] : unique) out.push_back(w);
  return out;
}

double GridCellResult::accuracy() const {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

double GridCellResult::avg_calls() const {
  return total == 0 ? 0.0 : static_cast<double>(llm_calls) / static_cast<double>(total);
}

namespace {

auto order_key(const GridCellResult& c) {
  return std::make_tuple(std::llround(c.weights.sparse * 1e9), std::llround(c.weights.dense * 1e9),
                         std::llround(c.weights.late * 1e9), std::llround(c.thresholds.alpha * 1e9),
                         std::llround(c.thresholds.beta * 1e9));
}

bool better(const GridCellResult& a, const GridCellResult& b) {
  if (a.correct != b.correct) return a.correct > b.correct;
  if (a.llm_calls != b.llm_calls) return a.llm_calls < b.llm_calls;
  return order_key(a) < order_key(b);
}

}  // namespace

GridResult grid_search(const std::vector<TrdRecord>& validation, const WeightGrid& weight_grid,
                       const ThresholdGrid& threshold_grid, const PipelineConfig& base,
                       const Providers& providers, std::size_t workers) {
  if (validation.empty()) throw ContractError("grid search needs a non-empty validation set");
  if (threshold_grid.alpha.empty() || threshold_grid.beta.empty()) {
    throw ContractError("threshold grid has an empty axis");
  }
  if (providers.llm == nullptr || providers.embedder == nullptr) {
    throw ContractError("grid search needs an llm and an embedder");
  }
  const auto weights = expand_weight_grid(weight_grid);

  std::vector<double> alphas = threshold_grid.alpha;
  std::vector<double> betas = threshold_grid.beta;
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
  std::sort(betas.begin(), betas.end());
  betas.erase(std::unique(betas.begin(), betas.end()), betas.end());

  CachingChatClient llm(*providers.llm);
  std::optional<CachingChatClient> allocator;
  if (providers.allocator && providers.allocator != providers.llm) allocator.emplace(*providers.allocator);
  CachingEmbedder embedder(*providers.embedder);
  PairCache pairs;
  RetrievalCache lookups;
  Providers memo = providers;
  memo.llm = &llm;
  memo.allocator = allocator ? &*allocator : nullptr;
  memo.embedder = &embedder;
  memo.pair_cache = &pairs;
  memo.retrieval_cache = &lookups;

  GridResult result;
  bool have_best = false;
  for (const auto& w : weights) {
    for (double alpha : alphas) {
      for (double beta : betas) {
        PipelineConfig cfg = base;
        cfg.weights = w;
        cfg.weights.epsilon = base.weights.epsilon;
        cfg.thresholds.alpha = alpha;
        cfg.thresholds.beta = beta;
        if (!(alpha > 0.0) || !(beta > alpha)) {
          ++result.skipped_invalid;
          continue;
        }
        auto report = evaluate(validation, cfg, memo, {workers, nullptr, {}});
        GridCellResult cell{cfg.weights, cfg.thresholds, 0, validation.size(), report.llm_calls};
        for (std::size_t i = 0; i < validation.size(); ++i) {
          const auto& res = report.results[i];
          if (res.run && res.error.empty() && is_correct(validation[i], answer_of(*res.run))) {
            ++cell.correct;
          }
        }
        if (!have_best || better(cell, result.best)) {
          result.best = cell;
          have_best = true;
        }
        result.cells.push_back(cell);
      }
    }
  }
  if (!have_best) throw ContractError("grid has no valid cell (every beta <= alpha)");
  return result;
}

json to_json(const GridCellResult& c) {
  return {{"weights", {{"sparse", c.weights.sparse}, {"dense", c.weights.dense}, {"late", c.weights.late}}},
          {"alpha", c.thresholds.alpha},
          {"beta", c.thresholds.beta},
          {"correct", c.correct},
          {"total", c.total},
          {"accuracy", c.accuracy()},
          {"avg_calls", c.avg_calls()}};
}

json to_json(const GridResult& r) {
  json cells = json::array();
  for (const auto& c : r.cells) cells.push_back(to_json(c));
  return {{"best", to_json(r.best)}, {"skipped_invalid", r.skipped_invalid}, {"cells", cells}};
}

}  // namespace trustroute
