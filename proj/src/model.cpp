#include "trustroute/model.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "trustroute/text.hpp"

namespace trustroute {

using nlohmann::json;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::FA: return "FA";
    case Strategy::FI: return "FI";
    case Strategy::FE: return "FE";
    case Strategy::RA: return "RA";
  }
  return "RA";
}

Strategy strategy_from_string(std::string_view s) {
  for (auto st : kAllStrategies) {
    if (text::iequals(s, to_string(st))) return st;
  }
  throw ContractError("unknown strategy: " + std::string(s));
}

std::string_view question_type_label(Strategy s) {
  switch (s) {
    case Strategy::FA: return "faithful to all knowledge";
    case Strategy::FI: return "faithful to internal knowledge";
    case Strategy::FE: return "faithful to external knowledge";
    case Strategy::RA: return "refuse to answer";
  }
  return "refuse to answer";
}

Strategy strategy_from_question_type(std::string_view label) {
  auto t = text::trim(label);
  for (auto st : kAllStrategies) {
    if (text::iequals(t, question_type_label(st)) || text::iequals(t, to_string(st))) return st;
  }
  throw DatasetError("unknown question_type: " + std::string(label));
}

std::string_view to_string(TemporalFactType t) {
  switch (t) {
    case TemporalFactType::None: return "none";
    case TemporalFactType::Evolution: return "evolution";
    case TemporalFactType::Perpetuation: return "perpetuation";
  }
  return "none";
}

TemporalFactType temporal_fact_type_from_string(std::string_view s) {
  auto t = text::trim(s);
  if (t.empty() || text::iequals(t, "none")) return TemporalFactType::None;
  if (text::iequals(t, "evolution")) return TemporalFactType::Evolution;
  if (text::iequals(t, "perpetuation")) return TemporalFactType::Perpetuation;
  throw DatasetError("unknown temporal_fact_type: " + std::string(s));
}

void Question::validate() const {
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (options[i].letter != static_cast<char>('A' + i)) {
      throw ContractError("option letters must run A, B, C, ... (question " + id + ")");
    }
  }
  if (correct_option && !find_option(*correct_option)) {
    throw ContractError("correct option " + std::string(1, *correct_option) +
                        " is not among the options (question " + id + ")");
  }
}

const Option* Question::find_option(char letter) const {
  for (const auto& o : options) {
    if (o.letter == letter) return &o;
  }
  return nullptr;
}

std::optional<char> Question::refusal_option() const {
  for (const auto& o : options) {
    if (is_refusal_text(o.text)) return o.letter;
  }
  return std::nullopt;
}

bool is_refusal_text(std::string_view s) {
  std::string lowered = text::to_lower(s);
  // Normalise typographic apostrophes (U+2019).
  for (std::size_t pos; (pos = lowered.find("\xE2\x80\x99")) != std::string::npos;) {
    lowered.replace(pos, 3, "'");
  }
  return lowered.find("i don't know") != std::string::npos ||
         lowered.find("i do not know") != std::string::npos ||
         lowered.find("i dont know") != std::string::npos;
}

bool is_empty_knowledge(std::string_view s) {
  auto t = text::trim(s);
  return t.empty() || text::iequals(t, "none");
}

SoftBias normalize_bias(double raw_r, double raw_g) {
  if (!std::isfinite(raw_r) || !std::isfinite(raw_g) || raw_r < 0.0 || raw_g < 0.0) {
    throw BiasParseError("bias percentages must be finite and non-negative");
  }
  const double total = raw_r + raw_g;
  if (total <= 0.0) throw BiasParseError("bias percentages are both zero");
  SoftBias b;
  b.r_p = raw_r / total;
  b.g_p = 1.0 - b.r_p;
  return b;
}

void HardBias::validate() const {
  const bool ok = (r_p == 1 && g_p == 0) || (r_p == 0 && g_p == 1);
  if (!ok) throw ContractError("hard bias must be (1,0) or (0,1)");
}

bool MatchScores::in_unit_range() const {
  for (double s : {s1, s2, s3, s4}) {
    if (!(s >= 0.0 && s <= 1.0)) return false;
  }
  return true;
}

std::vector<Option> parse_options_string(std::string_view s) {
  // Locate "A." then "B." ... in sequence so letters inside option text
  // ("John F. Kennedy") are not mistaken for markers.
  auto marker_at = [&](char letter, std::size_t from) -> std::size_t {
    for (std::size_t i = from; i + 1 < s.size(); ++i) {
      if (s[i] != letter || (s[i + 1] != '.' && s[i + 1] != ')')) continue;
      if (i == 0 || std::isspace(static_cast<unsigned char>(s[i - 1]))) return i;
    }
    return std::string_view::npos;
  };
  std::vector<Option> out;
  std::size_t pos = marker_at('A', 0);
  char letter = 'A';
  while (pos != std::string_view::npos) {
    std::size_t body = pos + 2;
    std::size_t next = marker_at(static_cast<char>(letter + 1), body);
    auto chunk = s.substr(body, next == std::string_view::npos ? std::string_view::npos
                                                                : next - body);
    out.push_back({letter, std::string(text::trim(chunk))});
    pos = next;
    ++letter;
  }
  return out;
}

std::string format_options(const std::vector<Option>& options) {
  std::string out;
  for (const auto& o : options) {
    if (!out.empty()) out += '\n';
    out += o.letter;
    out += ". ";
    out += o.text;
  }
  return out;
}

namespace {

std::vector<Option> options_from_json(const json& j) {
  std::vector<Option> out;
  if (j.is_null()) return out;
  if (j.is_string()) return parse_options_string(j.get<std::string>());
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key().size() != 1) throw DatasetError("option keys must be single letters");
      out.push_back({it.key()[0], it.value().get<std::string>()});
    }
    return out;
  }
  if (j.is_array()) {
    char letter = 'A';
    for (const auto& item : j) {
      auto s = item.get<std::string>();
      if (s.size() > 1 && s[0] == letter && (s[1] == '.' || s[1] == ')')) {
        out.push_back({letter, std::string(text::trim(std::string_view(s).substr(2)))});
      } else {
        out.push_back({letter, s});
      }
      ++letter;
    }
    return out;
  }
  throw DatasetError("options must be an object, array, or string");
}

std::string string_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw DatasetError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

std::string trd_to_json_line(const TrdRecord& r) {
  json j = json::object();
  if (!r.question.id.empty()) j["id"] = r.question.id;
  j["question"] = r.question.text;
  j["question_type"] = r.question_type;
  j["temporal_fact_type"] = r.temporal_fact_type;
  j["internal_knowledge"] = r.internal_knowledge;
  j["external_knowledge"] = r.external_knowledge;
  j["internal_answer"] = r.internal_answer;
  j["external_answer"] = r.external_answer;
  json opts = json::object();
  for (const auto& o : r.question.options) opts[std::string(1, o.letter)] = o.text;
  j["options"] = opts;
  j["correct_option"] =
      r.question.correct_option ? json(std::string(1, *r.question.correct_option)) : json();
  return j.dump();
}

TrdRecord trd_from_json_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DatasetError(std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) throw DatasetError("record must be a JSON object");
  TrdRecord r;
  try {
    auto id = j.find("id");
    if (id != j.end() && !id->is_null()) {
      r.question.id = id->is_string() ? id->get<std::string>() : id->dump();
    }
    r.question.text = string_field(j, "question");
    r.question_type = string_field(j, "question_type");
    r.temporal_fact_type = string_field(j, "temporal_fact_type");
    r.internal_knowledge = string_field(j, "internal_knowledge");
    r.external_knowledge = string_field(j, "external_knowledge");
    r.internal_answer = string_field(j, "internal_answer");
    r.external_answer = string_field(j, "external_answer");
    if (auto o = j.find("options"); o != j.end()) r.question.options = options_from_json(*o);
    auto correct = string_field(j, "correct_option");
    auto trimmed = text::trim(correct);
    if (!trimmed.empty()) r.question.correct_option = static_cast<char>(std::toupper(trimmed[0]));
  } catch (const json::exception& e) {
    throw DatasetError(std::string("malformed record: ") + e.what());
  }
  if (r.question.text.empty()) throw DatasetError("record has no question text");
  if (!r.question_type.empty()) {
    r.question.scenario_label = strategy_from_question_type(r.question_type);
  }
  if (!r.temporal_fact_type.empty()) {
    r.question.temporal_fact_type = temporal_fact_type_from_string(r.temporal_fact_type);
  }
  try {
    r.question.validate();
  } catch (const ContractError& e) {
    throw DatasetError(e.what());
  }
  return r;
}

std::vector<TrdRecord> load_trd_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset: " + path);
  std::vector<TrdRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(trd_from_json_line(line));
    } catch (const DatasetError& e) {
      throw DatasetError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (out.back().question.id.empty()) out.back().question.id = std::to_string(lineno);
  }
  return out;
}

void save_trd_jsonl(const std::string& path, const std::vector<TrdRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write dataset: " + path);
  for (const auto& r : records) out << trd_to_json_line(r) << '\n';
}

}  // namespace trustroute
