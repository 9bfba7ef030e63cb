#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trustroute/errors.hpp"

namespace trustroute {

/// The four response strategies.
///   FA  faithful to all knowledge
///   FI  faithful to internal knowledge
///   FE  faithful to external knowledge
///   RA  refuse to answer
enum class Strategy : std::uint8_t { FA, FI, FE, RA };

inline constexpr Strategy kAllStrategies[] = {Strategy::FA, Strategy::FI, Strategy::FE,
                                              Strategy::RA};

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);  // "FA" .. "RA"

/// Long-form labels used by the `question_type` field of dataset records.
std::string_view question_type_label(Strategy s);
Strategy strategy_from_question_type(std::string_view label);

enum class TemporalFactType : std::uint8_t { None, Evolution, Perpetuation };

std::string_view to_string(TemporalFactType t);
TemporalFactType temporal_fact_type_from_string(std::string_view s);

struct Option {
  char letter = 'A';
  std::string text;

  bool operator==(const Option&) const = default;
};

struct Question {
  std::string id;
  std::string text;
  std::vector<Option> options;
  std::optional<char> correct_option;
  std::optional<Strategy> scenario_label;
  std::optional<TemporalFactType> temporal_fact_type;

  /// Throws ContractError when option letters are not A, B, C, ... in order
  /// or when the correct option is not among them.
  void validate() const;

  const Option* find_option(char letter) const;
  /// The option whose text reads "I don't know", if any.
  std::optional<char> refusal_option() const;

  bool operator==(const Question&) const = default;
};

inline constexpr std::string_view kRefusalText = "I don't know";

/// True for text that reads as a refusal ("I don't know", "I do not know").
bool is_refusal_text(std::string_view text);

/// Absent knowledge: empty, whitespace, or the "None" sentinel (any case).
bool is_empty_knowledge(std::string_view text);

struct GeneratedAnswer {
  std::string subquery;
  std::string text;
  bool refused = false;
};

struct RetrievedPassage {
  std::string subquery;
  std::string chunk_id;
  std::string text;
  double score = 0.0;
  bool failed = false;  // lookup failed; text is empty
};

struct KnowledgeBundle {
  std::string k_int;
  std::string k_ext;
  std::vector<GeneratedAnswer> k_gen;
  std::vector<RetrievedPassage> k_ret;
};

/// Retrieval/generation dependency, stored as fractions summing to 1.
struct SoftBias {
  double r_p = 0.5;
  double g_p = 0.5;
  std::string analysis;
};

/// Proportional renormalisation of two raw percentages.
/// Throws BiasParseError for negative or all-zero input.
SoftBias normalize_bias(double raw_r, double raw_g);

struct HardBias {
  int r_p = 0;
  int g_p = 1;

  /// Throws ContractError unless exactly one component is 1 and the other 0.
  void validate() const;
  bool operator==(const HardBias&) const = default;
};

struct MatchScores {
  double s1 = 0.0;  // internal vs external
  double s2 = 0.0;  // generated vs internal
  double s3 = 0.0;  // retrieved vs external
  double s4 = 0.0;  // generated vs retrieved

  bool in_unit_range() const;
};

struct RuleFiring {
  std::string rule;
  std::string detail;
};

struct Decision {
  Strategy strategy = Strategy::RA;
  double t_ret = 0.0;
  double t_llm = 0.0;
  int reflections_used = 0;
  std::vector<RuleFiring> trace;
};

/// One line of a TRD-format dataset.
struct TrdRecord {
  Question question;
  std::string internal_knowledge;
  std::string external_knowledge;
  std::string internal_answer;
  std::string external_answer;
  std::string question_type;
  std::string temporal_fact_type;

  bool operator==(const TrdRecord&) const = default;
};

/// Parses "A. foo B. bar" style option strings; letters must run from A.
std::vector<Option> parse_options_string(std::string_view text);
std::string format_options(const std::vector<Option>& options);

std::string trd_to_json_line(const TrdRecord& record);
TrdRecord trd_from_json_line(std::string_view line);

std::vector<TrdRecord> load_trd_jsonl(const std::string& path);
void save_trd_jsonl(const std::string& path, const std::vector<TrdRecord>& records);

}  // namespace trustroute
