#include "trustroute/providers/chat.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <json.hpp>
#include <regex>
#include <sstream>
#include <thread>

#include "trustroute/text.hpp"

namespace trustroute {

using nlohmann::json;

void CallMeter::record_chat(std::string_view stage) {
  llm_calls_.fetch_add(1);
  std::lock_guard lock(mu_);
  ++by_stage_[std::string(stage)];
}

void CallMeter::record_retrieval() { retrievals_.fetch_add(1); }

MeterSnapshot CallMeter::snapshot() const {
  MeterSnapshot s;
  std::lock_guard lock(mu_);
  s.llm_calls = llm_calls_.load();
  s.retrievals = retrievals_.load();
  s.by_stage = by_stage_;
  return s;
}

ChatResponse chat(ChatClient& client, const ChatRequest& request, CallMeter& meter) {
  ChatResponse response = client.complete(request);
  if (text::trim(response.text).empty()) {
    throw ProviderError("empty completion for stage '" + request.stage + "'");
  }
  meter.record_chat(request.stage);
  return response;
}

namespace {

struct SplitUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

SplitUrl split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ProviderError("invalid endpoint url: " + url);
  SplitUrl out{m[1].str(), m[2].matched ? m[2].str() : std::string()};
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

std::string post_json(const HttpEndpoint& endpoint, std::string_view path,
                      const std::string& body) {
  const auto url = split_url(endpoint.base_url);
  const std::string full_path = url.path_prefix + std::string(path);
  httplib::Headers headers;
  if (!endpoint.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + endpoint.api_key);
  }

  auto backoff = endpoint.retry.initial_backoff;
  const int attempts = std::max(1, endpoint.retry.max_attempts);
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(endpoint.timeout);
    client.set_read_timeout(endpoint.timeout);
    client.set_write_timeout(endpoint.timeout);
    auto res = client.Post(full_path, headers, body, "application/json");
    if (res && res->status >= 200 && res->status < 300) return res->body;
    if (res && !retryable_status(res->status)) {
      throw ProviderError("HTTP " + std::to_string(res->status) + " from " + endpoint.base_url +
                          full_path + ": " + res->body.substr(0, 512));
    }
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    spdlog::warn("request to {}{} failed (attempt {}/{}): {}", endpoint.base_url, std::string(path),
                 attempt, attempts, last_error);
    if (attempt < attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(backoff.count()) *
                                    endpoint.retry.multiplier));
    }
  }
  throw ProviderError("request to " + endpoint.base_url + full_path + " failed after " +
                      std::to_string(attempts) + " attempts: " + last_error);
}

std::string build_chat_payload(const HttpEndpoint& endpoint, const ChatRequest& request) {
  json messages = json::array();
  if (!request.system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_prompt}});
  json payload = {{"model", endpoint.model},
                  {"messages", messages},
                  {"temperature", request.temperature},
                  {"max_tokens", request.max_tokens}};
  return payload.dump();
}

ChatResponse parse_chat_payload(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProviderError(std::string("malformed chat payload: ") + e.what());
  }
  ChatResponse out;
  try {
    const auto& choices = j.at("choices");
    if (!choices.is_array() || choices.empty()) throw ProviderError("chat payload has no choices");
    const auto& content = choices.at(0).at("message").at("content");
    if (!content.is_string()) throw ProviderError("chat payload content is not a string");
    out.text = content.get<std::string>();
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
      out.usage.prompt_tokens = u->value("prompt_tokens", 0);
      out.usage.completion_tokens = u->value("completion_tokens", 0);
      out.usage.total_tokens = u->value("total_tokens", 0);
    }
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed chat payload: ") + e.what());
  }
  if (text::trim(out.text).empty()) throw ProviderError("chat payload has empty content");
  return out;
}

OpenAIChatClient::OpenAIChatClient(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  split_url(endpoint_.base_url);
}

ChatResponse OpenAIChatClient::complete(const ChatRequest& request) {
  auto body = post_json(endpoint_, "/chat/completions", build_chat_payload(endpoint_, request));
  return parse_chat_payload(body);
}

// ---------------------------------------------------------------------------

ScriptedChatClient::ScriptedChatClient(std::vector<Rule> rules,
                                       std::optional<std::string> fallback)
    : rules_(std::move(rules)), fallback_(std::move(fallback)) {}

std::unique_ptr<ScriptedChatClient> ScriptedChatClient::from_json_text(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed mock script: ") + e.what());
  }
  auto client = std::make_unique<ScriptedChatClient>();
  try {
    if (auto h = j.find("by_hash"); h != j.end()) {
      for (auto it = h->begin(); it != h->end(); ++it) {
        client->by_hash_[it.key()] = it.value().get<std::string>();
      }
    }
    if (auto rs = j.find("rules"); rs != j.end()) {
      for (const auto& r : *rs) {
        Rule rule;
        if (auto s = r.find("stage"); s != r.end() && !s->is_null()) rule.stage = s->get<std::string>();
        if (auto c = r.find("contains"); c != r.end()) {
          if (c->is_string()) {
            rule.contains.push_back(c->get<std::string>());
          } else {
            rule.contains = c->get<std::vector<std::string>>();
          }
        }
        if (auto one = r.find("response"); one != r.end()) {
          rule.responses.push_back(one->get<std::string>());
        }
        if (auto many = r.find("responses"); many != r.end()) {
          for (const auto& s : *many) rule.responses.push_back(s.get<std::string>());
        }
        rule.fail = r.value("fail", false);
        if (!rule.fail && rule.responses.empty()) {
          throw ConfigError("mock rule has neither response(s) nor fail");
        }
        client->rules_.push_back(std::move(rule));
      }
    }
    if (auto d = j.find("default"); d != j.end() && !d->is_null()) {
      client->fallback_ = d->get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed mock script: ") + e.what());
  }
  return client;
}

std::unique_ptr<ScriptedChatClient> ScriptedChatClient::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void ScriptedChatClient::add_rule(Rule rule) {
  std::lock_guard lock(mu_);
  rules_.push_back(std::move(rule));
}

void ScriptedChatClient::add_exact(std::string_view user_prompt, std::string response) {
  std::lock_guard lock(mu_);
  by_hash_[text::hex64(text::fnv1a64(user_prompt))] = std::move(response);
}

void ScriptedChatClient::set_default(std::optional<std::string> response) {
  std::lock_guard lock(mu_);
  fallback_ = std::move(response);
}

ChatResponse ScriptedChatClient::complete(const ChatRequest& request) {
  const auto hash = text::fnv1a64(request.user_prompt);
  std::lock_guard lock(mu_);
  log_.push_back(request);

  if (auto it = by_hash_.find(text::hex64(hash)); it != by_hash_.end()) return {it->second, {}};

  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& rule = rules_[i];
    if (rule.stage && *rule.stage != request.stage) continue;
    bool all = true;
    for (const auto& needle : rule.contains) {
      if (request.user_prompt.find(needle) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (!all) continue;
    if (rule.fail) throw ProviderError("scripted transport failure (stage " + request.stage + ")");
    auto& count = seen_[{i, hash}];
    const auto idx = std::min(count, rule.responses.size() - 1);
    ++count;
    return {rule.responses[idx], {}};
  }
  if (fallback_) return {*fallback_, {}};
  throw ProviderError("no scripted response for stage '" + request.stage + "'");
}

std::vector<ChatRequest> ScriptedChatClient::requests() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t ScriptedChatClient::request_count() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

ChatResponse CachingChatClient::complete(const ChatRequest& request) {
  std::string key = request.stage;
  key += '\x1f';
  key += request.system_prompt;
  key += '\x1f';
  key += request.user_prompt;
  key += '\x1f' + std::to_string(request.temperature) + '\x1f' + std::to_string(request.max_tokens);
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto response = inner_.complete(request);
  misses_.fetch_add(1);
  std::lock_guard lock(mu_);
  return cache_.emplace(std::move(key), std::move(response)).first->second;
}

std::size_t CachingChatClient::size() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

}  // namespace trustroute
