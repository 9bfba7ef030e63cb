#pragma once

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "trustroute/allocator.hpp"
#include "trustroute/pipeline.hpp"
#include "trustroute/prompts.hpp"
#include "trustroute/providers/chat.hpp"
#include "trustroute/providers/embedding.hpp"
#include "trustroute/providers/index.hpp"

namespace trustroute {

/// A chat backend: an OpenAI-compatible endpoint or a scripted mock.
struct ChatBackendConfig {
  std::string kind = "mock";  // "openai" | "mock"
  HttpEndpoint endpoint;
  std::string mock_script;    // path, for kind == "mock"
};

struct EmbedderConfig {
  std::string kind = "hashing";  // "hashing" | "remote"
  std::size_t dense_dim = 256;
  std::size_t token_dim = 64;
  HttpEndpoint endpoint;
  std::size_t batch_size = 32;
};

/// One experiment. Relative paths are resolved against the config file's
/// directory; "${VAR}" and "${VAR:-default}" in strings read the
/// environment.
struct AppConfig {
  ChatBackendConfig llm;
  std::optional<ChatBackendConfig> allocator;  // remote allocator endpoint
  std::string demonstrations;                  // JSONL of demonstrations
  EmbedderConfig embedder;
  std::string index;                           // saved passage index
  std::string prompts_dir;
  PipelineConfig pipeline;
  std::size_t workers = 1;
  std::string source;                          // file the config came from

  nlohmann::json to_json() const;  // secrets are redacted
};

/// "${VAR}" / "${VAR:-default}" substitution; unset variables without a
/// default become empty.
std::string interpolate_env(const std::string& s);

AppConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
/// ConfigError when the file is missing or malformed.
AppConfig load_config(const std::string& path);

/// Owns the providers a config describes.
struct Runtime {
  std::unique_ptr<ChatClient> llm;
  std::unique_ptr<ChatClient> allocator;
  std::unique_ptr<Embedder> base_embedder;
  std::unique_ptr<CachingEmbedder> embedder;
  std::optional<PassageIndex> index;
  std::vector<Demonstration> demonstrations;
  PromptSet prompts;

  Providers providers() const;
};

std::unique_ptr<ChatClient> make_chat_client(const ChatBackendConfig& c);
std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& c);

/// `mock_script`, when non-empty, replaces the LLM (and allocator) with a
/// scripted mock.
std::unique_ptr<Runtime> build_runtime(const AppConfig& config, const std::string& mock_script = "");

}  // namespace trustroute
