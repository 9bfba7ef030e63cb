#include "trustroute/config.hpp"

#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace trustroute {

using nlohmann::json;
namespace fs = std::filesystem;

std::string interpolate_env(const std::string& s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s.compare(i, 2, "${") != 0) {
      out.push_back(s[i++]);
      continue;
    }
    const auto close = s.find('}', i + 2);
    if (close == std::string::npos) throw ConfigError("unterminated ${ in config value: " + s);
    std::string expr = s.substr(i + 2, close - i - 2);
    std::string name = expr;
    std::optional<std::string> fallback;
    if (auto sep = expr.find(":-"); sep != std::string::npos) {
      name = expr.substr(0, sep);
      fallback = expr.substr(sep + 2);
    }
    if (const char* v = std::getenv(name.c_str()); v != nullptr && *v != '\0') {
      out += v;
    } else if (fallback) {
      out += *fallback;
    } else {
      spdlog::warn("environment variable {} is not set", name);
    }
    i = close + 1;
  }
  return out;
}

namespace {

json interpolate_all(const json& j) {
  if (j.is_string()) return interpolate_env(j.get<std::string>());
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(interpolate_all(v));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = interpolate_all(it.value());
    return out;
  }
  return j;
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_absolute()) return p;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

HttpEndpoint endpoint_from_json(const json& j) {
  HttpEndpoint e;
  e.base_url = j.value("base_url", e.base_url);
  e.api_key = j.value("api_key", e.api_key);
  e.model = j.value("model", e.model);
  e.timeout = std::chrono::seconds(j.value("timeout_s", static_cast<int>(e.timeout.count())));
  e.retry.max_attempts = j.value("max_attempts", e.retry.max_attempts);
  e.retry.initial_backoff =
      std::chrono::milliseconds(j.value("backoff_ms", static_cast<int>(e.retry.initial_backoff.count())));
  if (e.retry.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
  return e;
}

json endpoint_to_json(const HttpEndpoint& e) {
  return {{"base_url", e.base_url},
          {"api_key", e.api_key.empty() ? "" : "<redacted>"},
          {"model", e.model},
          {"timeout_s", e.timeout.count()},
          {"max_attempts", e.retry.max_attempts},
          {"backoff_ms", e.retry.initial_backoff.count()}};
}

ChatBackendConfig chat_from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("chat backend settings must be an object");
  ChatBackendConfig c;
  c.kind = j.value("kind", c.kind);
  if (c.kind != "openai" && c.kind != "mock") throw ConfigError("unknown llm kind: " + c.kind);
  c.endpoint = endpoint_from_json(j);
  c.mock_script = resolve(base_dir, j.value("mock_script", std::string()));
  return c;
}

json chat_to_json(const ChatBackendConfig& c) {
  auto j = endpoint_to_json(c.endpoint);
  j["kind"] = c.kind;
  j["mock_script"] = c.mock_script;
  return j;
}

}  // namespace

AppConfig config_from_json(const json& raw, const std::string& base_dir) {
  if (!raw.is_object()) throw ConfigError("config must be a JSON object");
  const json j = interpolate_all(raw);
  AppConfig c;
  try {
    if (auto it = j.find("llm"); it != j.end()) c.llm = chat_from_json(*it, base_dir);
    if (auto it = j.find("allocator"); it != j.end()) {
      if (!it->is_object()) throw ConfigError("allocator settings must be an object");
      if (auto m = it->find("mode"); m != it->end()) {
        c.pipeline.allocator_mode = allocator_mode_from_string(m->get<std::string>());
      }
      if (auto e = it->find("endpoint"); e != it->end()) c.allocator = chat_from_json(*e, base_dir);
      c.demonstrations = resolve(base_dir, it->value("demonstrations", std::string()));
    }
    if (auto it = j.find("embedder"); it != j.end()) {
      c.embedder.kind = it->value("kind", c.embedder.kind);
      if (c.embedder.kind != "hashing" && c.embedder.kind != "remote") {
        throw ConfigError("unknown embedder kind: " + c.embedder.kind);
      }
      c.embedder.dense_dim = it->value("dense_dim", c.embedder.dense_dim);
      c.embedder.token_dim = it->value("token_dim", c.embedder.token_dim);
      c.embedder.batch_size = it->value("batch_size", c.embedder.batch_size);
      c.embedder.endpoint = endpoint_from_json(*it);
    }
    c.index = resolve(base_dir, j.value("index", std::string()));
    c.prompts_dir = resolve(base_dir, j.value("prompts_dir", std::string()));
    c.workers = j.value("workers", c.workers);
    if (c.workers < 1) throw ConfigError("workers must be at least 1");
    if (auto it = j.find("pipeline"); it != j.end()) {
      const auto mode = c.pipeline.allocator_mode;
      c.pipeline = pipeline_config_from_json(*it);
      if (!it->contains("allocator_mode")) c.pipeline.allocator_mode = mode;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  if (c.pipeline.allocator_mode == AllocatorMode::Remote && !c.allocator) {
    spdlog::info("remote allocator mode without an allocator endpoint; the llm endpoint is used");
  }
  return c;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  auto base = fs::path(path).parent_path().string();
  auto c = config_from_json(j, base.empty() ? "." : base);
  c.source = path;
  return c;
}

json AppConfig::to_json() const {
  json j{{"llm", chat_to_json(llm)},
         {"allocator",
          {{"mode", std::string(trustroute::to_string(pipeline.allocator_mode))},
           {"endpoint", allocator ? chat_to_json(*allocator) : json()},
           {"demonstrations", demonstrations}}},
         {"embedder",
          {{"kind", embedder.kind},
           {"dense_dim", embedder.dense_dim},
           {"token_dim", embedder.token_dim},
           {"batch_size", embedder.batch_size},
           {"endpoint", endpoint_to_json(embedder.endpoint)}}},
         {"index", index},
         {"prompts_dir", prompts_dir},
         {"prompt_version", std::string(kPromptVersion)},
         {"workers", workers},
         {"pipeline", trustroute::to_json(pipeline)}};
  if (!source.empty()) j["source"] = source;
  return j;
}

Providers Runtime::providers() const {
  Providers p;
  p.llm = llm.get();
  p.allocator = allocator ? allocator.get() : nullptr;
  p.embedder = embedder.get();
  p.index = index ? &*index : nullptr;
  p.demonstrations = &demonstrations;
  p.prompts = &prompts;
  return p;
}

std::unique_ptr<ChatClient> make_chat_client(const ChatBackendConfig& c) {
  if (c.kind == "openai") {
    if (c.endpoint.base_url.empty()) throw ConfigError("openai backend needs base_url");
    if (c.endpoint.model.empty()) throw ConfigError("openai backend needs model");
    return std::make_unique<OpenAIChatClient>(c.endpoint);
  }
  if (c.mock_script.empty()) throw ConfigError("mock backend needs mock_script");
  try {
    return ScriptedChatClient::from_file(c.mock_script);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& c) {
  if (c.kind == "remote") {
    if (c.endpoint.base_url.empty()) throw ConfigError("remote embedder needs base_url");
    return std::make_unique<RemoteEmbedder>(c.endpoint, c.batch_size);
  }
  if (c.dense_dim < 1 || c.token_dim < 1) throw ConfigError("embedding dimensions must be positive");
  return std::make_unique<HashingEmbedder>(c.dense_dim, c.token_dim);
}

std::unique_ptr<Runtime> build_runtime(const AppConfig& config, const std::string& mock_script) {
  auto rt = std::make_unique<Runtime>();
  if (!mock_script.empty()) {
    ChatBackendConfig mock{"mock", {}, mock_script};
    rt->llm = make_chat_client(mock);
  } else {
    rt->llm = make_chat_client(config.llm);
    if (config.allocator) rt->allocator = make_chat_client(*config.allocator);
  }
  rt->base_embedder = make_embedder(config.embedder);
  rt->embedder = std::make_unique<CachingEmbedder>(*rt->base_embedder);
  if (!config.index.empty()) {
    try {
      rt->index = load_index(config.index);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    if (rt->index->embedder != rt->base_embedder->name()) {
      throw ConfigError("index " + config.index + " was built with embedder '" + rt->index->embedder +
                        "', config uses '" + rt->base_embedder->name() + "'");
    }
  }
  if (!config.demonstrations.empty()) {
    try {
      rt->demonstrations = load_demonstrations(config.demonstrations);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  rt->prompts = config.prompts_dir.empty() ? default_prompts() : load_prompts(config.prompts_dir);
  return rt;
}

}  // namespace trustroute
