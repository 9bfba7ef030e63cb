#include "trustroute/prompts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "trustroute/errors.hpp"

namespace trustroute {

namespace {

constexpr const char* kAllocatorGrpo = R"(Task Description:

Evaluate the following question to determine the probability of requiring external knowledge to answer it versus the probability of answering it directly [10%-90%].
Provide the results in the following format:

Analysis:
(Your analysis.)

Probability of retrieving external knowledge:
(Assess whether the question requires up-to-date data, specialized knowledge, or dynamic content.)

Probability of answering directly:
(Assess whether the question can be answered based on pre-trained knowledge.)

Evaluate the following question: {question}
)";

constexpr const char* kAllocatorIcl = R"(Task Description:

Evaluate the following question to determine the probability of requiring external knowledge to answer it versus the probability of answering it directly [10%-90%]. Provide the results in the following format:

Probability of retrieving external knowledge:
(Assess whether the question requires up-to-date data, specialized knowledge, or dynamic content.)

Probability of answering directly:
(Assess whether the question can be answered based on pre-trained knowledge or logical reasoning.

Examples:
{examples}

Evaluate the following question: {question}
)";

constexpr const char* kSubqueryGeneration = R"(Please design {number} new wildly diverse questions with different words that have the same answer as Original Question. Requirements:

1. Use different sentence structures.

2. Each question must employ a unique interrogative word (how/which/why, etc.).

3. Cover multiple dimensions of problem-solving.

4. Finally, rank the questions in descending order of importance for each dimension.

Origin Question: {question}

New Questions:

1. [New Question 1]

2. [New Question 2]

...

{number}. [New Question {number}]
)";

constexpr const char* kMultiQueryGenerator = R"(Please analyse before answering the following questions. If you are unsure of the answer or do not know the correct answer, please clearly respond with 'I don't know'. Do not guess or make up information.

Question: {generated_queries}

Answers:
)";

constexpr const char* kResponder = R"(Answer the question by selecting the most accurate option based on the provided document. Return only the uppercase letter of the correct option. The output must follow this exact format:

Correct Option: [Letter]

Example:
Correct Option: B.

Document: {knowledge}

Question: {question}

Options: {options}
)";

constexpr const char* kResponderOpen = R"(Answer the question based on the provided document. Return only the answer. If the document does not contain the answer, respond with 'I don't know'.

Document: {knowledge}

Question: {question}

Answer:
)";

constexpr const char* kReflection = R"(==Input data==

Original question: {question}

Knowledge document:

Internal knowledge: {internal_knowledge}

External knowledge: {external_knowledge}

Generated knowledge: {generated_knowledge}

Retrieved knowledge: {retrieved_knowledge}


Phase 1: Knowledge contradiction analysis

Please perform the following analysis steps:

Consistency verification:

1. Confirm the consistency performance of internal knowledge and generated knowledge.

2. Confirm the consistency performance of external knowledge and retrieved knowledge.

3. Mark the specific contradictions between internal and external knowledge.

Contradiction classification (analyzed from the following dimensions):

Factual contradiction (objective fact difference)

Timeliness contradiction (new and old information difference)

Perspective contradiction (position/viewpoint difference)

Integrity contradiction (information coverage difference)

Root cause analysis:

Model knowledge limitation (training data/time cutoff)

External knowledge bias (source reliability/update frequency)

Retrieval matching error (query-document relevance)

Generate hallucination problem

Phase 2: Problem reconstruction requirements

Based on the above analysis, please design {number} new wildly diverse questions with different words that have the same answer as original question. Requirements:

1. Use different sentence structures.

2. Each question must employ a unique interrogative word (how/which/why, etc.).

3. Cover multiple dimensions of problem-solving.

4. Finally, rank the questions in descending order of importance for each dimension.

5. Pay attention to checking knowledge contradictions in the questions.

Output format

[Knowledge contradiction analysis]

[Main contradiction]

[Contradiction type]

[Possible cause]

[Reconstruct question list] (in descending order of importance)

New questions:

1. [New Question 1]

2. [New Question 2]

...

{number}. [New Question {number}]
)";

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read prompt template: " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

PromptSet default_prompts() {
  return PromptSet{kAllocatorGrpo,       kAllocatorIcl, kSubqueryGeneration, kMultiQueryGenerator,
                   kResponder,           kResponderOpen, kReflection};
}

std::vector<std::pair<std::string, std::string PromptSet::*>> prompt_files() {
  return {{"allocator_grpo.txt", &PromptSet::allocator_grpo},
          {"allocator_icl.txt", &PromptSet::allocator_icl},
          {"subquery_generation.txt", &PromptSet::subquery_generation},
          {"multi_query_generator.txt", &PromptSet::multi_query_generator},
          {"responder.txt", &PromptSet::responder},
          {"responder_open.txt", &PromptSet::responder_open},
          {"reflection.txt", &PromptSet::reflection}};
}

PromptSet load_prompts(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("prompt template directory not found: " + dir);
  PromptSet prompts = default_prompts();
  for (const auto& [file, member] : prompt_files()) {
    const auto p = fs::path(dir) / file;
    if (fs::exists(p)) prompts.*member = read_file(p);
  }
  return prompts;
}

void write_prompts(const PromptSet& prompts, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const auto& [file, member] : prompt_files()) {
    std::ofstream out(fs::path(dir) / file, std::ios::binary);
    if (!out) throw ConfigError("cannot write prompt template: " + (fs::path(dir) / file).string());
    out << prompts.*member;
  }
}

}  // namespace trustroute
