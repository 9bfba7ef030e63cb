#include "world.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "trustroute/text.hpp"

namespace fixtures {

using namespace trustroute;
using nlohmann::json;

char letter_for(Strategy s) {
  switch (s) {
    case Strategy::FI: return 'A';
    case Strategy::FE: return 'B';
    case Strategy::FA: return 'C';
    case Strategy::RA: return 'D';
  }
  return 'D';
}

std::string case_tag(int key) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "c%03d", key);
  return buf;
}

std::string probe_tag(int key, int round, int slot) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%03dr%ds%02d", key, round, slot);
  return buf;
}

std::string question_text(int key) { return "Which record describes entry " + case_tag(key) + "?"; }

std::string subquery_text(const CaseSpec& c, int round, int slot) {
  return c.rounds.at(static_cast<std::size_t>(round)).at(static_cast<std::size_t>(slot)).passage + " " +
         probe_tag(c.key, round, slot);
}

std::string Lexicon::word() {
  static const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                  "br", "dr", "kl", "pr", "st", "tr", "sk", "gl"};
  static const char* kNuclei[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
  std::string w;
  const int syllables = 2 + static_cast<int>(next() % 2);
  for (int i = 0; i < syllables; ++i) {
    w += kOnsets[next() % (sizeof kOnsets / sizeof *kOnsets)];
    w += kNuclei[next() % (sizeof kNuclei / sizeof *kNuclei)];
  }
  return w;
}

std::string Lexicon::sentence(int words) {
  std::string s;
  for (int i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += word();
  }
  return s;
}

void MockWorld::add(CaseSpec c) {
  for (const auto& round : c.rounds) {
    if (static_cast<int>(round.size()) != n_) throw std::invalid_argument("round size differs from n");
  }
  if (c.rounds.empty()) throw std::invalid_argument("case needs at least one round");
  cases_.push_back(std::move(c));
}

std::vector<TrdRecord> MockWorld::records() const {
  std::vector<TrdRecord> out;
  for (const auto& c : cases_) {
    TrdRecord r;
    r.question.id = case_tag(c.key);
    r.question.text = question_text(c.key);
    r.question.options = {{'A', c.internal_answer},
                          {'B', c.external_answer},
                          {'C', "both sources: " + c.internal_answer},
                          {'D', std::string(kRefusalText)}};
    r.question.correct_option = letter_for(c.gold);
    r.question.scenario_label = c.gold;
    r.internal_knowledge = c.k_int;
    r.external_knowledge = c.k_ext;
    r.internal_answer = c.internal_answer;
    r.external_answer = c.external_answer;
    r.question_type = std::string(question_type_label(c.gold));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Document> MockWorld::corpus() const {
  std::vector<Document> docs;
  for (const auto& c : cases_) {
    for (int r = 0; r < static_cast<int>(c.rounds.size()); ++r) {
      for (int s = 0; s < n_; ++s) docs.push_back({probe_tag(c.key, r, s), subquery_text(c, r, s)});
    }
  }
  return docs;
}

namespace {

std::string numbered(const CaseSpec& c, int round, int n) {
  std::string out;
  for (int s = 0; s < n; ++s) out += std::to_string(s + 1) + ". " + subquery_text(c, round, s) + "\n";
  return out;
}

}  // namespace

json MockWorld::script() const {
  json rules = json::array();
  for (const auto& c : cases_) {
    const auto q = question_text(c.key);
    rules.push_back({{"stage", "allocator"},
                     {"contains", {q}},
                     {"response", "Analysis:\nEntry " + case_tag(c.key) + " mixes stable and changing facts.\n\n" +
                                      "Probability of retrieving external knowledge: " + std::to_string(c.r_pct) +
                                      "%\nProbability of answering directly: " + std::to_string(c.g_pct) + "%"}});
    rules.push_back({{"stage", "subqueries"}, {"contains", {q}}, {"response", "New Questions:\n" + numbered(c, 0, n_)}});
    const int rounds = static_cast<int>(c.rounds.size());
    for (int r = 0; r < rounds; ++r) {
      const int next = std::min(r + 1, rounds - 1);
      rules.push_back({{"stage", "reflection"},
                       {"contains", {probe_tag(c.key, r, 0)}},
                       {"response", "[Knowledge contradiction analysis]\nSources disagree.\n\nNew questions:\n" +
                                        numbered(c, next, n_)}});
      for (int s = 0; s < n_; ++s) {
        rules.push_back({{"stage", "generator"},
                         {"contains", {probe_tag(c.key, r, s)}},
                         {"response", c.rounds[static_cast<std::size_t>(r)][static_cast<std::size_t>(s)].answer}});
      }
    }
  }
  rules.push_back({{"stage", "responder"},
                   {"contains", {"Internal knowledge:", "External knowledge:"}},
                   {"response", "Correct Option: C"}});
  rules.push_back({{"stage", "responder"}, {"contains", {"Internal knowledge:"}}, {"response", "Correct Option: A"}});
  rules.push_back({{"stage", "responder"}, {"contains", {"External knowledge:"}}, {"response", "Correct Option: B"}});
  return {{"rules", rules}};
}

std::unique_ptr<ScriptedChatClient> MockWorld::client() const {
  return ScriptedChatClient::from_json_text(script().dump());
}

PassageIndex MockWorld::index(Embedder& embedder) const { return build_index(corpus(), embedder); }

void MockWorld::write(const std::string& dir, Embedder& embedder) const {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "corpus");
  save_trd_jsonl((fs::path(dir) / "dataset.jsonl").string(), records());
  {
    std::ofstream out(fs::path(dir) / "corpus" / "passages.jsonl");
    for (const auto& d : corpus()) out << json{{"id", d.id}, {"text", d.text}}.dump() << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "script.json");
    out << script().dump(1) << "\n";
  }
  save_index(index(embedder), (fs::path(dir) / "index.jsonl").string());
  json config{{"llm", {{"kind", "mock"}, {"mock_script", "script.json"}}},
              {"embedder", {{"kind", "hashing"}}},
              {"index", "index.jsonl"},
              {"workers", 1},
              {"pipeline", {{"subqueries", n_}}}};
  std::ofstream out(fs::path(dir) / "config.json");
  out << config.dump(2) << "\n";
}

namespace {

constexpr int kWords = 7;

std::vector<Probe> probes(int n, const std::function<Probe(int)>& make) {
  std::vector<Probe> out;
  for (int s = 0; s < n; ++s) out.push_back(make(s));
  return out;
}

CaseSpec base_case(Strategy gold, int key, int r_pct, Lexicon& lex) {
  CaseSpec c;
  c.key = key;
  c.gold = gold;
  c.r_pct = r_pct;
  c.g_pct = 100 - r_pct;
  c.internal_answer = lex.sentence(2);
  c.external_answer = lex.sentence(2);
  return c;
}

}  // namespace

CaseSpec scenario_case(Strategy s, int variant, int key, Lexicon& lex, int n) {
  const std::string refusal(kRefusalText);
  switch (s) {
    case Strategy::FA: {
      auto c = base_case(s, key, 10, lex);
      const auto fact = lex.sentence(kWords);
      c.k_int = c.k_ext = fact;
      c.external_answer = c.internal_answer;
      c.rounds.push_back(probes(n, [&](int) { return Probe{fact, fact}; }));
      return c;
    }
    case Strategy::FI: {
      auto c = base_case(s, key, 10, lex);
      c.k_int = lex.sentence(kWords);
      c.k_ext = lex.sentence(kWords);
      c.rounds.push_back(probes(n, [&](int) { return Probe{lex.sentence(kWords), c.k_int}; }));
      return c;
    }
    case Strategy::FE: {
      auto c = base_case(s, key, 90, lex);
      c.k_int = lex.sentence(kWords);
      c.k_ext = lex.sentence(kWords);
      c.rounds.push_back(probes(n, [&](int) { return Probe{c.k_ext, lex.sentence(kWords)}; }));
      return c;
    }
    case Strategy::RA: break;
  }
  if (variant == 0) {
    auto c = base_case(Strategy::RA, key, 90, lex);
    c.k_int = lex.sentence(kWords);
    c.k_ext = lex.sentence(kWords);
    c.rounds.push_back(probes(n, [&](int) { return Probe{lex.sentence(kWords), c.k_int}; }));
    return c;
  }
  auto c = base_case(Strategy::RA, key, 50, lex);
  c.k_int = "None";
  c.k_ext = lex.sentence(kWords);
  c.internal_answer = "None";
  for (int r = 0; r < 4; ++r) {
    c.rounds.push_back(probes(n, [&](int) { return Probe{lex.sentence(kWords), refusal}; }));
  }
  return c;
}

MockWorld scenario_world(std::uint64_t seed, int n) {
  Lexicon lex(seed);
  MockWorld world(n);
  int key = 1;
  for (Strategy s : {Strategy::FA, Strategy::FI, Strategy::FE, Strategy::RA}) {
    for (int i = 0; i < 10; ++i) world.add(scenario_case(s, s == Strategy::RA ? i % 2 : 0, key++, lex, n));
  }
  return world;
}

CaseSpec ideal_path_case(int key, Lexicon& lex, int n) {
  auto c = scenario_case(Strategy::FE, 0, key, lex, n);
  c.r_pct = 80;
  c.g_pct = 20;
  return c;
}

namespace {

std::string mix(const std::string& a, const std::string& b, Lexicon& lex, double share_a) {
  const auto wa = text::split_whitespace(a);
  const auto wb = text::split_whitespace(b);
  std::string out;
  const std::size_t len = std::max(wa.size(), wb.size());
  for (std::size_t i = 0; i < len; ++i) {
    const bool take_a = lex.uniform() < share_a;
    const auto& src = take_a ? wa : wb;
    if (src.empty()) continue;
    if (!out.empty()) out += ' ';
    out += src[i % src.size()];
  }
  return out.empty() ? a : out;
}

}  // namespace

CaseSpec random_case(int key, Lexicon& lex, int n, int rounds) {
  static const int kBias[] = {10, 20, 30, 40, 50, 60, 70, 80, 90};
  CaseSpec c = base_case(Strategy::RA, key, kBias[lex.next() % 9], lex);
  const auto a = lex.sentence(kWords);
  const double u = lex.uniform();
  const auto b = u < 0.2 ? a : (u < 0.45 ? mix(a, lex.sentence(kWords), lex, 0.5) : lex.sentence(kWords));
  c.k_int = lex.uniform() < 0.1 ? "None" : a;
  c.k_ext = b;
  const double ret_good = lex.uniform();
  const double gen_good = lex.uniform();
  const double refuse = lex.uniform() * 0.5;
  for (int r = 0; r < rounds; ++r) {
    c.rounds.push_back(probes(n, [&](int) {
      Probe p;
      const double x = lex.uniform();
      if (x < ret_good * 0.6) {
        p.passage = b;
      } else if (x < ret_good) {
        p.passage = mix(b, lex.sentence(kWords), lex, lex.uniform());
      } else if (x < ret_good + (1 - ret_good) * 0.3) {
        p.passage = mix(a, lex.sentence(kWords), lex, lex.uniform());
      } else {
        p.passage = lex.sentence(kWords);
      }
      const double y = lex.uniform();
      if (y < refuse) {
        p.answer = std::string(kRefusalText);
      } else if (y < refuse + (1 - refuse) * gen_good * 0.6) {
        p.answer = a;
      } else if (y < refuse + (1 - refuse) * gen_good) {
        p.answer = mix(a, lex.sentence(kWords), lex, lex.uniform());
      } else if (y < refuse + (1 - refuse) * (gen_good + (1 - gen_good) * 0.3)) {
        p.answer = mix(b, lex.sentence(kWords), lex, lex.uniform());
      } else {
        p.answer = lex.sentence(kWords);
      }
      return p;
    }));
  }
  return c;
}

}  // namespace fixtures
