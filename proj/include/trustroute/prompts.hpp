#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace trustroute {

inline constexpr std::string_view kPromptVersion = "v1";

/// Prompt templates with `{name}` placeholders.
struct PromptSet {
  std::string allocator_grpo;        // {question}
  std::string allocator_icl;         // {examples} {question}
  std::string subquery_generation;   // {number} {question}
  std::string multi_query_generator; // {generated_queries}
  std::string responder;             // {knowledge} {question} {options}
  std::string responder_open;        // {knowledge} {question}; questions without options
  std::string reflection;            // {question} {internal_knowledge} {external_knowledge}
                                     // {generated_knowledge} {retrieved_knowledge} {number}
};

PromptSet default_prompts();

/// File name (inside a template directory) for each template.
std::vector<std::pair<std::string, std::string PromptSet::*>> prompt_files();

/// Starts from the defaults and replaces every template whose file exists
/// in `dir`.
PromptSet load_prompts(const std::string& dir);
void write_prompts(const PromptSet& prompts, const std::string& dir);

}  // namespace trustroute
