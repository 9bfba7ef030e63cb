#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trustroute/errors.hpp"

namespace trustroute {

// Pipeline stage names used for call accounting and mock routing.
namespace stage {
inline constexpr std::string_view kAllocator = "allocator";
inline constexpr std::string_view kSubqueries = "subqueries";
inline constexpr std::string_view kGenerator = "generator";
inline constexpr std::string_view kReflection = "reflection";
inline constexpr std::string_view kResponder = "responder";
}  // namespace stage

struct ChatRequest {
  std::string stage;
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  int max_tokens = 512;
};

/// Sampling settings applied to every request a module issues.
struct GenerationSettings {
  double temperature = 0.0;
  int max_tokens = 512;
};

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t total_tokens = 0;
};

struct ChatResponse {
  std::string text;
  TokenUsage usage;
};

/// A chat-completion backend. Implementations must be safe to call from
/// several threads at once.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct MeterSnapshot {
  std::int64_t llm_calls = 0;
  std::int64_t retrievals = 0;
  std::map<std::string, std::int64_t> by_stage;
};

/// Counts successful chat calls (overall and per stage) and index lookups.
class CallMeter {
 public:
  void record_chat(std::string_view stage);
  void record_retrieval();

  std::int64_t llm_calls() const { return llm_calls_.load(); }
  std::int64_t retrievals() const { return retrievals_.load(); }
  MeterSnapshot snapshot() const;

 private:
  std::atomic<std::int64_t> llm_calls_{0};
  std::atomic<std::int64_t> retrievals_{0};
  mutable std::mutex mu_;
  std::map<std::string, std::int64_t> by_stage_;
};

/// Sends one request and records it on the meter. Empty completions are a
/// malformed payload and raise ProviderError; the meter only counts calls
/// that returned a usable completion.
ChatResponse chat(ChatClient& client, const ChatRequest& request, CallMeter& meter);

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

struct HttpEndpoint {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string api_key;
  std::string model;
  std::chrono::seconds timeout{60};
  RetryPolicy retry;
};

/// POSTs a JSON body to base_url + path. Transport errors, 429 and 5xx are
/// retried with exponential backoff; other statuses and unparsable bodies
/// fail immediately. Returns the response body.
std::string post_json(const HttpEndpoint& endpoint, std::string_view path,
                      const std::string& body);

/// OpenAI-style /chat/completions client.
class OpenAIChatClient final : public ChatClient {
 public:
  explicit OpenAIChatClient(HttpEndpoint endpoint);
  ChatResponse complete(const ChatRequest& request) override;

  const HttpEndpoint& endpoint() const { return endpoint_; }

 private:
  HttpEndpoint endpoint_;
};

std::string build_chat_payload(const HttpEndpoint& endpoint, const ChatRequest& request);
ChatResponse parse_chat_payload(std::string_view body);

/// Deterministic scripted backend for tests and offline runs.
///
/// Lookup order: exact prompt hash (FNV-1a of the user prompt, hex), then
/// the first rule whose stage (if set) matches and whose `contains`
/// substrings all occur in the user prompt. A rule with several responses
/// returns them in order for repeated identical prompts and then sticks to
/// the last one.
class ScriptedChatClient final : public ChatClient {
 public:
  struct Rule {
    std::optional<std::string> stage;
    std::vector<std::string> contains;
    std::vector<std::string> responses;
    bool fail = false;  // simulate an exhausted transport
  };

  ScriptedChatClient() = default;
  ScriptedChatClient(std::vector<Rule> rules, std::optional<std::string> fallback);

  /// Parses {"by_hash": {...}, "rules": [...], "default": "..."}.
  static std::unique_ptr<ScriptedChatClient> from_json_text(std::string_view json_text);
  static std::unique_ptr<ScriptedChatClient> from_file(const std::string& path);

  void add_rule(Rule rule);
  void add_exact(std::string_view user_prompt, std::string response);
  void set_default(std::optional<std::string> response);

  ChatResponse complete(const ChatRequest& request) override;

  std::vector<ChatRequest> requests() const;
  std::size_t request_count() const;

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> by_hash_;
  std::vector<Rule> rules_;
  std::optional<std::string> fallback_;
  std::map<std::pair<std::size_t, std::uint64_t>, std::size_t> seen_;
  std::vector<ChatRequest> log_;
};

/// Memoises another client by (stage, prompts, sampling settings). Only
/// sound for deterministic backends; the meter still counts every call.
class CachingChatClient final : public ChatClient {
 public:
  explicit CachingChatClient(ChatClient& inner) : inner_(inner) {}
  ChatResponse complete(const ChatRequest& request) override;

  std::size_t size() const;
  std::size_t misses() const { return misses_.load(); }

 private:
  ChatClient& inner_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, ChatResponse> cache_;
  std::atomic<std::size_t> misses_{0};
};

/// Adapts a callable into a ChatClient.
class CallbackChatClient final : public ChatClient {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;
  explicit CallbackChatClient(Fn fn) : fn_(std::move(fn)) {}
  ChatResponse complete(const ChatRequest& request) override { return {fn_(request), {}}; }

 private:
  Fn fn_;
};

}  // namespace trustroute
