#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "trustroute/model.hpp"

namespace trustroute {

struct Thresholds {
  double alpha = 0.5;
  double beta = 1.1;
  int max_reflections = 3;

  /// Throws ContractError unless beta > alpha > 0 and max_reflections >= 0.
  void validate() const;
};

enum class Outcome : std::uint8_t { FA, FI, FE, RA, Reflect };

std::string_view to_string(Outcome o);
Strategy to_strategy(Outcome o);  // ContractError for Reflect

struct TrustScores {
  double t_ret = 0.0;
  double t_llm = 0.0;
};

/// Both sources agree with each other: s1 + s4 > (1 - s1) + (1 - s4).
bool detect_conflict(const MatchScores& scores);

/// t_ret = r_p * (s3 + (1 - s2)),  t_llm = g_p * (s2 + (1 - s3)).
TrustScores trust_scores(const SoftBias& bias, const MatchScores& scores);

struct Verdict {
  Outcome outcome = Outcome::RA;
  TrustScores trust;
  std::vector<RuleFiring> trace;
};

/// The maximum soft-bias decision tree.
///
///   conflict check passes                -> FA
///   t_ret <  t_llm:  t_llm > alpha       -> FI, else RA
///   t_ret >= t_llm:  t_ret >= beta       -> FE
///                    t_ret <  alpha      -> RA
///                    otherwise           -> Reflect, or RA once
///                                           reflections_used >= max_reflections
///
/// Trust scores are always reported, including on the FA path.
Verdict decide(const SoftBias& bias, const MatchScores& scores, const Thresholds& thresholds,
               int reflections_used);

}  // namespace trustroute
