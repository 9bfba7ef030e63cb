#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "trustroute/providers/chat.hpp"
#include "trustroute/providers/embedding.hpp"
#include "trustroute/providers/index.hpp"
#include "trustroute/text.hpp"

using namespace trustroute;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// A loopback HTTP server on an ephemeral port, stopped on destruction.
struct LocalServer {
  httplib::Server svr;
  int port = 0;
  std::thread thread;

  void start() {
    port = svr.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }
  ~LocalServer() {
    svr.stop();
    if (thread.joinable()) thread.join();
  }
  HttpEndpoint endpoint() const {
    HttpEndpoint e;
    e.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    e.api_key = "sk-test";
    e.model = "test-model";
    e.timeout = std::chrono::seconds(5);
    e.retry = {3, std::chrono::milliseconds(1), 2.0};
    return e;
  }
};

std::string completion_body(const std::string& text) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
              {"usage", {{"prompt_tokens", 3}, {"completion_tokens", 2}, {"total_tokens", 5}}}}
      .dump();
}

std::string words(int n, const std::string& stem = "w") {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + stem + std::to_string(i);
  return s;
}

}  // namespace

TEST_CASE("scripted client: hash, rules, sequences and failures") {
  ScriptedChatClient c;
  c.add_exact("exact prompt", "by hash");
  c.add_rule({"generator", {"alpha", "beta"}, {"first", "second"}, false});
  c.add_rule({std::nullopt, {"boom"}, {""}, true});
  CallMeter meter;
  CHECK(chat(c, {"x", "", "exact prompt"}, meter).text == "by hash");
  CHECK(chat(c, {"generator", "", "alpha and beta"}, meter).text == "first");
  CHECK(chat(c, {"generator", "", "alpha and beta"}, meter).text == "second");
  CHECK(chat(c, {"generator", "", "alpha and beta"}, meter).text == "second");
  CHECK_THROWS_AS(chat(c, {"responder", "", "alpha and beta"}, meter), ProviderError);
  CHECK_THROWS_AS(chat(c, {"x", "", "boom"}, meter), ProviderError);
  CHECK(meter.llm_calls() == 4);
  CHECK(meter.snapshot().by_stage.at("generator") == 3);
  CHECK(c.request_count() == 6);
  c.set_default("fallback");
  CHECK(chat(c, {"responder", "", "anything"}, meter).text == "fallback");

  const auto j = ScriptedChatClient::from_json_text(
      R"({"by_hash": {")" + text::hex64(text::fnv1a64("hi")) +
      R"(": "hello"}, "rules": [{"stage": "allocator", "contains": ["q"], "response": "r"}], "default": "d"})");
  CHECK(j->complete({"allocator", "", "hi"}).text == "hello");
  CHECK(j->complete({"allocator", "", "q?"}).text == "r");
  CHECK(j->complete({"other", "", "q?"}).text == "d");
  CHECK_THROWS_AS(ScriptedChatClient::from_json_text("{"), ConfigError);
}

TEST_CASE("empty completions are not counted") {
  CallbackChatClient empty([](const ChatRequest&) { return std::string("  "); });
  CallMeter meter;
  CHECK_THROWS_AS(chat(empty, {"s", "", "p"}, meter), ProviderError);
  CHECK(meter.llm_calls() == 0);
}

TEST_CASE("caching client memoises but the meter still counts") {
  int hits = 0;
  CallbackChatClient inner([&](const ChatRequest& r) { ++hits; return "re: " + r.user_prompt; });
  CachingChatClient cache(inner);
  CallMeter meter;
  chat(cache, {"g", "", "one"}, meter);
  chat(cache, {"g", "", "one"}, meter);
  chat(cache, {"g", "", "two"}, meter);
  ChatRequest warmer{"g", "", "one", 0.7, 512};
  chat(cache, warmer, meter);
  CHECK(hits == 3);
  CHECK(cache.misses() == 3);
  CHECK(cache.size() == 3);
  CHECK(meter.llm_calls() == 4);
}

TEST_CASE("openai client talks to a compatible endpoint") {
  LocalServer s;
  json seen;
  std::string auth;
  s.svr.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(completion_body("Correct Option: B"), "application/json");
  });
  s.start();
  OpenAIChatClient client(s.endpoint());
  const auto r = client.complete({"responder", "be brief", "Which?", 0.0, 64});
  CHECK(r.text == "Correct Option: B");
  CHECK(r.usage.total_tokens == 5);
  CHECK(auth == "Bearer sk-test");
  CHECK(seen["model"] == "test-model");
  CHECK(seen["messages"].size() == 2);
  CHECK(seen["messages"][1]["content"] == "Which?");
  CHECK(seen["max_tokens"] == 64);
}

TEST_CASE("openai client retries transient failures") {
  LocalServer s;
  std::atomic<int> calls{0};
  s.svr.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = calls == 1 ? 503 : 429;
      return;
    }
    res.set_content(completion_body("ok"), "application/json");
  });
  s.start();
  OpenAIChatClient client(s.endpoint());
  CHECK(client.complete({"g", "", "p"}).text == "ok");
  CHECK(calls == 3);
}

TEST_CASE("openai client gives up on exhausted retries and client errors") {
  LocalServer s;
  std::atomic<int> calls{0};
  s.svr.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    res.status = req.body.find("bad") != std::string::npos ? 400 : 500;
  });
  s.svr.Post("/v2/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "application/json");
  });
  s.start();
  OpenAIChatClient client(s.endpoint());
  CHECK_THROWS_AS(client.complete({"g", "", "p"}), ProviderError);
  CHECK(calls == 3);
  calls = 0;
  CHECK_THROWS_AS(client.complete({"g", "", "bad"}), ProviderError);
  CHECK(calls == 1);

  auto ep = s.endpoint();
  ep.base_url = "http://127.0.0.1:" + std::to_string(s.port) + "/v2";
  CHECK_THROWS_AS(OpenAIChatClient(ep).complete({"g", "", "p"}), ProviderError);
}

TEST_CASE("unreachable endpoint raises after retries") {
  HttpEndpoint ep;
  ep.base_url = "http://127.0.0.1:1/v1";
  ep.timeout = std::chrono::seconds(1);
  ep.retry = {2, std::chrono::milliseconds(1), 2.0};
  CHECK_THROWS_AS(OpenAIChatClient(ep).complete({"g", "", "p"}), ProviderError);
  ep.base_url = "not a url";
  CHECK_THROWS_AS(OpenAIChatClient(ep).complete({"g", "", "p"}), ProviderError);
}

TEST_CASE("chat payload parsing") {
  CHECK(parse_chat_payload(completion_body("x")).text == "x");
  CHECK_THROWS_AS(parse_chat_payload(R"({"choices": []})"), ProviderError);
  CHECK_THROWS_AS(parse_chat_payload(completion_body("")), ProviderError);
  const auto p = json::parse(build_chat_payload({"u", "", "m"}, {"s", "", "hello", 0.2, 9}));
  CHECK(p["messages"].size() == 1);
  CHECK(p["temperature"] == 0.2);
}

TEST_CASE("hashing embedder") {
  HashingEmbedder emb;
  const auto two = emb.embed({"x", "x"});
  CHECK(two[0].dense == two[1].dense);
  CHECK(two[0].sparse == two[1].sparse);
  const auto t = embed_one(emb, "The quick brown fox");
  CHECK(cosine(t.dense, t.dense) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(t.dense.size() == 256);
  CHECK(t.token_vectors.size() == 4);
  for (const auto& [k, w] : t.sparse) CHECK(w >= 0);
  const auto a = embed_one(emb, "red green"), b = embed_one(emb, "blue yellow");
  for (const auto& [k, w] : a.sparse) CHECK(b.sparse.count(k) == 0);
  CHECK_THROWS_AS(emb.embed({}), ContractError);
  CHECK(emb.name() == "hashing-v1-256x64");
}

TEST_CASE("caching embedder") {
  HashingEmbedder base;
  CachingEmbedder emb(base);
  const auto a = emb.embed({"one", "two", "one"});
  CHECK(emb.size() == 2);
  CHECK(a[0].dense == a[2].dense);
  CHECK(emb.name() == base.name());
}

TEST_CASE("remote embedder reads dense vectors and fills the other views") {
  LocalServer s;
  std::atomic<int> batches{0};
  s.svr.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    ++batches;
    const auto in = json::parse(req.body)["input"];
    json data = json::array();
    for (std::size_t i = 0; i < in.size(); ++i) data.push_back({{"embedding", {1.0, double(i + 1), 0.0}}});
    res.set_content(json{{"data", data}}.dump(), "application/json");
  });
  s.start();
  RemoteEmbedder emb(s.endpoint(), 2);
  const auto out = emb.embed({"a b", "c", "d"});
  REQUIRE(out.size() == 3);
  CHECK(batches == 2);
  CHECK(out[0].dense.size() == 3);
  CHECK(out[0].dense[0] == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(out[0].sparse.count("a") == 1);
  CHECK(out[0].token_vectors.size() == 2);
  CHECK(emb.dense_dim() == 3);
  CHECK(emb.name() == "remote:test-model");
}

TEST_CASE("chunking follows sentence boundaries") {
  const std::string doc = words(199) + " end. " + words(99, "v") + " end.";
  std::vector<std::string> warnings;
  const auto chunks = chunk_text(doc, 256, &warnings);
  REQUIRE(chunks.size() == 2);
  CHECK(text::split_whitespace(chunks[0]).size() == 200);
  CHECK(text::split_whitespace(chunks[1]).size() == 100);
  CHECK(warnings.empty());

  CHECK(chunk_text(words(256), 256).size() == 1);

  const auto split = chunk_text(words(300), 256, &warnings);
  REQUIRE(split.size() == 2);
  CHECK(text::split_whitespace(split[0]).size() == 256);
  CHECK(warnings.size() == 1);
}

TEST_CASE("index build, retrieval and persistence") {
  HashingEmbedder emb;
  const std::vector<Document> docs{{"a", "The harbour office opens at nine."},
                                   {"b", "Violet mountains tremble at dusk."},
                                   {"c", "Copper kettles whistle in winter."}};
  const auto index = build_index(docs, emb);
  CHECK(index.size() == 3);
  CHECK(index.chunks[1].id == "b#0");

  const auto top = retrieve(index, emb, "Violet mountains tremble at dusk.", 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0].chunk_id == "b#0");
  const auto all = retrieve(index, emb, "kettles", 10);
  CHECK(all.size() == 3);
  CHECK(all[0].score >= all[1].score);
  CHECK(all[1].score >= all[2].score);
  CHECK_THROWS_AS(retrieve(PassageIndex{}, emb, "q", 1), RetrievalError);
  CHECK_THROWS_AS(retrieve(index, emb, "q", 0), ContractError);
  CHECK_THROWS_AS(build_index({}, emb), ContractError);

  const auto dir = fs::temp_directory_path() / "trustroute_index_test";
  fs::create_directories(dir);
  const auto path = (dir / "index.jsonl").string();
  save_index(index, path);
  const auto back = load_index(path);
  CHECK(back.size() == 3);
  CHECK(back.embedder == emb.name());
  CHECK(back.chunks[2].dense == index.chunks[2].dense);
  fs::remove_all(dir);
}

TEST_CASE("corpus directories") {
  const auto dir = fs::temp_directory_path() / "trustroute_corpus_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "b.txt") << "Second file.";
  std::ofstream(dir / "a.jsonl") << R"({"id": "x", "text": "one"})" << "\n" << R"({"id": "y", "text": "two"})" << "\n";
  const auto docs = load_corpus_dir(dir.string());
  REQUIRE(docs.size() == 3);
  CHECK(docs[0].id == "x");
  CHECK(docs[2].id == "b");
  fs::remove_all(dir);
}
