#include "trustroute/decision.hpp"

#include <spdlog/fmt/fmt.h>

namespace trustroute {

void Thresholds::validate() const {
  if (!(alpha > 0.0)) throw ContractError("alpha must be positive");
  if (!(beta > alpha)) throw ContractError("beta must exceed alpha");
  if (max_reflections < 0) throw ContractError("max_reflections must be non-negative");
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::FA: return "FA";
    case Outcome::FI: return "FI";
    case Outcome::FE: return "FE";
    case Outcome::RA: return "RA";
    case Outcome::Reflect: return "Reflect";
  }
  return "RA";
}

Strategy to_strategy(Outcome o) {
  switch (o) {
    case Outcome::FA: return Strategy::FA;
    case Outcome::FI: return Strategy::FI;
    case Outcome::FE: return Strategy::FE;
    case Outcome::RA: return Strategy::RA;
    case Outcome::Reflect: break;
  }
  throw ContractError("Reflect is not a response strategy");
}

bool detect_conflict(const MatchScores& s) {
  return s.s1 + s.s4 > (1.0 - s.s1) + (1.0 - s.s4);
}

TrustScores trust_scores(const SoftBias& bias, const MatchScores& s) {
  return {bias.r_p * (s.s3 + (1.0 - s.s2)), bias.g_p * (s.s2 + (1.0 - s.s3))};
}

Verdict decide(const SoftBias& bias, const MatchScores& scores, const Thresholds& thr,
               int reflections_used) {
  Verdict v;
  v.trust = trust_scores(bias, scores);
  const double t_ret = v.trust.t_ret;
  const double t_llm = v.trust.t_llm;

  if (detect_conflict(scores)) {
    v.outcome = Outcome::FA;
    v.trace.push_back({"conflict_detection",
                       fmt::format("s1+s4={:.6g} > (1-s1)+(1-s4)={:.6g}", scores.s1 + scores.s4,
                                   (1.0 - scores.s1) + (1.0 - scores.s4))});
    return v;
  }
  v.trace.push_back({"conflict_detection", fmt::format("s1+s4={:.6g}: no consensus",
                                                       scores.s1 + scores.s4)});

  if (t_ret < t_llm) {
    if (t_llm > thr.alpha) {
      v.outcome = Outcome::FI;
      v.trace.push_back({"llm_branch", fmt::format("t_llm={:.6g} > alpha={:.6g}", t_llm, thr.alpha)});
    } else {
      v.outcome = Outcome::RA;
      v.trace.push_back({"llm_branch", fmt::format("t_llm={:.6g} <= alpha={:.6g}", t_llm, thr.alpha)});
    }
    return v;
  }

  if (t_ret >= thr.beta) {
    v.outcome = Outcome::FE;
    v.trace.push_back({"retriever_branch", fmt::format("t_ret={:.6g} >= beta={:.6g}", t_ret, thr.beta)});
  } else if (t_ret < thr.alpha) {
    v.outcome = Outcome::RA;
    v.trace.push_back({"retriever_branch", fmt::format("t_ret={:.6g} < alpha={:.6g}", t_ret, thr.alpha)});
  } else if (reflections_used >= thr.max_reflections) {
    v.outcome = Outcome::RA;
    v.trace.push_back({"reflection_cap", fmt::format("t_ret={:.6g} in [alpha, beta) after {} reflections",
                                                     t_ret, reflections_used)});
  } else {
    v.outcome = Outcome::Reflect;
    v.trace.push_back({"retriever_branch", fmt::format("alpha <= t_ret={:.6g} < beta; reflect", t_ret)});
  }
  return v;
}

}  // namespace trustroute
