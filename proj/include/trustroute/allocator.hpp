#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trustroute/model.hpp"
#include "trustroute/prompts.hpp"
#include "trustroute/providers/chat.hpp"
#include "trustroute/providers/embedding.hpp"

namespace trustroute {

/// A soft-bias demonstration for in-context allocation. Biases are fractions.
struct Demonstration {
  std::string question;
  double r_p = 0.5;
  double g_p = 0.5;
  std::string analysis;
};

/// Parsed allocator completion; percentages are kept raw (0..100 scale).
struct AllocatorOutput {
  std::string analysis;
  std::optional<double> r_pct;
  std::optional<double> g_pct;

  bool parse_ok() const { return r_pct.has_value() && g_pct.has_value(); }
};

/// Reads "Probability of retrieving external knowledge: 80%" style lines.
/// A percentage may be written "80%", "80 percent" or a bare "80", on the
/// label line or the next lines before the other label; the first match
/// per label wins. The analysis is the "Analysis:" section, or whatever
/// precedes the first probability label.
AllocatorOutput parse_allocator_output(std::string_view completion);

/// 1 -> 0.90, 0 -> 0.10.
std::pair<double, double> harden_to_soft(const HardBias& hard);

/// FA/FI -> (r=0, g=1); FE/RA -> (r=1, g=0).
HardBias hard_bias_for_scenario(Strategy label);

/// Pseudo soft-bias demonstrations built from labelled records.
std::vector<Demonstration> demonstrations_from_records(const std::vector<TrdRecord>& records);

inline constexpr std::size_t kDefaultDemonstrations = 5;

/// The k demonstrations whose questions have the highest dense cosine to
/// the question, descending (stable for ties). Throws AllocatorError when
/// the training set is empty.
std::vector<Demonstration> select_demonstrations(const Question& question,
                                                 const std::vector<Demonstration>& train_set,
                                                 std::size_t k, Embedder& embedder);

std::string format_demonstrations(const std::vector<Demonstration>& demos);

std::vector<Demonstration> load_demonstrations(const std::string& path);
void save_demonstrations(const std::string& path, const std::vector<Demonstration>& demos);

struct AllocationResult {
  SoftBias bias;
  AllocatorOutput output;
  int attempts = 0;
  bool fallback = false;  // both attempts failed to parse; bias is (0.5, 0.5)
};

AllocationResult allocate_icl(const Question& question, const std::vector<Demonstration>& demos,
                              ChatClient& llm, CallMeter& meter, const PromptSet& prompts,
                              const GenerationSettings& settings = {});

AllocationResult allocate_remote(const Question& question, ChatClient& endpoint,
                                 CallMeter& meter, const PromptSet& prompts,
                                 const GenerationSettings& settings = {});

// Reward functions for policy-optimisation training of an allocator.

double reward_direction(const AllocatorOutput& out, const HardBias& hard);
double reward_format(const AllocatorOutput& out);
double reward_sum(const AllocatorOutput& out);
/// Dense cosine between predicted and reference analysis, clamped to [0,1].
double reward_analysis(const AllocatorOutput& out, std::string_view gold_analysis,
                       Embedder& embedder);

/// Weights of the four rewards. Unvalidated defaults: 1.0 each.
struct RewardWeights {
  double direction = 1.0;
  double format = 1.0;
  double sum = 1.0;
  double analysis = 1.0;
};

double combined_reward(const AllocatorOutput& out, const HardBias& hard,
                       std::string_view gold_analysis, Embedder& embedder,
                       const RewardWeights& weights = {});

struct SynthesisCandidate {
  std::string analysis;
  double r_p = 0.0;  // fraction
  double g_p = 0.0;
};

/// Index of the candidate with the smallest RMS distance to the hard bias;
/// the first one wins ties. Throws ContractError on an empty list.
std::size_t select_synthesis_output(const std::vector<SynthesisCandidate>& candidates,
                                    const HardBias& hard);

}  // namespace trustroute
