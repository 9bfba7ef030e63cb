#pragma once

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "trustroute/model.hpp"
#include "trustroute/providers/chat.hpp"
#include "trustroute/providers/embedding.hpp"
#include "trustroute/providers/index.hpp"

namespace fixtures {

using trustroute::Strategy;

/// One sub-query slot: the passage the index returns for it and what the
/// generator answers when asked it.
struct Probe {
  std::string passage;
  std::string answer;
};

/// A scripted question. rounds[0] are the initial sub-queries; rounds[k]
/// are returned by the k-th reflection (the last round repeats).
struct CaseSpec {
  int key = 0;
  Strategy gold = Strategy::RA;
  int r_pct = 50;
  int g_pct = 50;
  std::string k_int;
  std::string k_ext;
  std::string internal_answer;
  std::string external_answer;
  std::vector<std::vector<Probe>> rounds;
};

/// Responder letters per strategy: A internal, B external, C both, D refusal.
char letter_for(Strategy s);

std::string case_tag(int key);                       // "c007"
std::string probe_tag(int key, int round, int slot);  // "c007r0s03"
std::string question_text(int key);
/// The sub-query text, which is also the indexed passage text.
std::string subquery_text(const CaseSpec& c, int round, int slot);

/// Deterministic pseudo-word text.
class Lexicon {
 public:
  explicit Lexicon(std::uint64_t seed) : rng_(seed) {}
  std::string word();
  std::string sentence(int words);
  std::uint64_t next() { return rng_(); }
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 rng_;
};

/// Collects cases and renders them as a dataset, a corpus and a mock script.
class MockWorld {
 public:
  explicit MockWorld(int n = 10) : n_(n) {}

  void add(CaseSpec c);
  int n() const { return n_; }
  const std::vector<CaseSpec>& cases() const { return cases_; }

  std::vector<trustroute::TrdRecord> records() const;
  std::vector<trustroute::Document> corpus() const;
  nlohmann::json script() const;
  std::unique_ptr<trustroute::ScriptedChatClient> client() const;
  trustroute::PassageIndex index(trustroute::Embedder& embedder) const;

  /// dataset.jsonl, corpus/passages.jsonl, script.json, index.jsonl and a
  /// config.json pointing at them.
  void write(const std::string& dir, trustroute::Embedder& embedder) const;

 private:
  int n_;
  std::vector<CaseSpec> cases_;
};

/// Decisive cases per scenario. Variants: RA 0 refuses through the low
/// retriever-trust rule, RA 1 stays in the reflection band until the cap.
CaseSpec scenario_case(Strategy s, int variant, int key, Lexicon& lex, int n = 10);

/// 10 FA, 10 FI, 10 FE, 10 RA (5 of each RA variant), keys 1..40.
MockWorld scenario_world(std::uint64_t seed = 7, int n = 10);

/// FE case with bias 80/20: s_g = 2 under n = 10.
CaseSpec ideal_path_case(int key, Lexicon& lex, int n = 10);

/// A case with randomised sources and probes, for grid-search engineering.
CaseSpec random_case(int key, Lexicon& lex, int n = 10, int rounds = 4);

}  // namespace fixtures
