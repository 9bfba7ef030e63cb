#pragma once

#include <json.hpp>

#include <array>
#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trustroute/model.hpp"
#include "trustroute/pipeline.hpp"

namespace trustroute {

/// What a run emitted for one question.
struct Answer {
  std::optional<char> option;
  std::string text;
};

Answer answer_of(const RunRecord& run);

/// Gold answer strings by scenario: FA both answers, FI the internal one,
/// FE the external one, RA "I don't know"; unlabelled records use every
/// non-empty answer.
std::vector<std::string> gold_answers(const TrdRecord& record);

bool is_refusal_answer(const Question& question, const Answer& answer);

/// Option letter against correct_option; records without options fall
/// back to exact match against gold_answers.
bool is_correct(const TrdRecord& record, const Answer& answer);

/// Percentages in [0, 100]. ContractError on empty input or size mismatch.
double accuracy(const std::vector<TrdRecord>& records, const std::vector<Answer>& answers);
/// Counts refusals over every record, whatever its gold label.
double refusal_rate(const std::vector<TrdRecord>& records, const std::vector<Answer>& answers);

/// Lowercase, drop punctuation, drop a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view s);
int exact_match(std::string_view prediction, const std::vector<std::string>& golds);

/// Accuracy per API call. ContractError when avg_calls <= 0.
double efficiency(double accuracy_pct, double avg_calls);

/// Gold scenario x predicted strategy counts, indexed FA, FI, FE, RA.
struct ScenarioReport {
  std::array<std::array<std::size_t, 4>, 4> matrix{};
  std::array<std::size_t, 4> counts{};
  std::array<std::size_t, 4> correct{};
  std::size_t unlabeled = 0;  // records without a gold scenario or a decision

  /// Percentage of gold-`s` records routed to `s`; nullopt with no records.
  std::optional<double> accuracy(Strategy s) const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

ScenarioReport scenario_report(const std::vector<TrdRecord>& records,
                               const std::vector<std::optional<Strategy>>& decisions);

struct EvalOptions {
  std::size_t workers = 1;
  /// Checked before each question starts; questions already running finish.
  const std::atomic<bool>* cancel = nullptr;
  /// Called after each finished question with (done, total).
  std::function<void(std::size_t, std::size_t)> progress;
};

struct QuestionResult {
  std::optional<RunRecord> run;  // empty when skipped by cancellation
  std::string error;             // non-empty when the run raised
};

struct EvalReport {
  std::size_t total = 0;
  std::size_t completed = 0;
  std::size_t failed = 0;
  bool complete = true;
  double accuracy = 0.0;
  double refusal_rate = 0.0;
  std::optional<double> exact_match;  // mean over open (option-less) records
  double avg_calls = 0.0;
  std::optional<double> efficiency;
  double reflection_rate = 0.0;
  std::int64_t llm_calls = 0;
  ScenarioReport scenarios;
  std::vector<QuestionResult> results;  // dataset order

  /// Metrics plus the per-question run records (without timing when
  /// `include_timing` is false).
  nlohmann::json to_json(bool include_runs = true, bool include_timing = true) const;
};

/// Runs every record through the pipeline on a bounded worker pool and
/// folds the finished runs into metrics. A question whose run raises is
/// kept as a failure and scored as wrong. Metrics cover the questions that
/// ran; `complete` is false after cancellation.
EvalReport evaluate(const std::vector<TrdRecord>& records, const PipelineConfig& config,
                    const Providers& providers, const EvalOptions& options = {});

// Grid search over scorer weights and decision thresholds.

struct WeightGrid {
  std::vector<double> sparse;
  std::vector<double> dense;
  std::vector<double> late;
};

struct ThresholdGrid {
  std::vector<double> alpha;
  std::vector<double> beta;
};

/// lo, lo + step, ... up to hi inclusive (within 1e-9), rounded to 1e-9.
std::vector<double> range_grid(double lo, double hi, double step);

/// Weights in [0.1, 1.0] and thresholds in [0.1, 2.0] at the given steps
/// (0.1 and 0.1 for the full sweep).
WeightGrid sweep_weight_grid(double step);
ThresholdGrid sweep_threshold_grid(double step);

/// Every triple normalised to sum 1, duplicates and all-zero triples
/// removed, in lexicographic order.
std::vector<ScorerWeights> expand_weight_grid(const WeightGrid& grid);

struct GridCellResult {
  ScorerWeights weights;
  Thresholds thresholds;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::int64_t llm_calls = 0;

  double accuracy() const;
  double avg_calls() const;
};

struct GridResult {
  GridCellResult best;
  std::vector<GridCellResult> cells;  // evaluation order
  std::size_t skipped_invalid = 0;    // beta <= alpha
};

/// Highest accuracy wins; ties go to fewer calls, then the lexicographically
/// smallest (sparse, dense, late, alpha, beta). Completions and embeddings
/// are memoised across cells, so the LLM must be deterministic.
/// ContractError for an empty validation set, an empty grid, or a grid
/// with no valid cell.
GridResult grid_search(const std::vector<TrdRecord>& validation, const WeightGrid& weight_grid,
                       const ThresholdGrid& threshold_grid, const PipelineConfig& base,
                       const Providers& providers, std::size_t workers = 1);

nlohmann::json to_json(const GridCellResult& cell);
nlohmann::json to_json(const GridResult& result);

}  // namespace trustroute
