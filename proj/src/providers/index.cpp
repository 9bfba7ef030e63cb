#include "trustroute/providers/index.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "trustroute/text.hpp"

namespace trustroute {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool ends_sentence(std::string_view token) {
  while (!token.empty()) {
    const char c = token.back();
    if (c == '"' || c == '\'' || c == ')' || c == ']' || c == '}') {
      token.remove_suffix(1);
      continue;
    }
    break;
  }
  if (token.empty()) return false;
  const char c = token.back();
  return c == '.' || c == '!' || c == '?';
}

std::string join(const std::vector<std::string>& tokens, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::string>> split_sentences(std::string_view input) {
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> current;
  bool prev_blank = false;
  for (const auto& line : text::split_lines(input)) {
    if (text::trim(line).empty()) {
      if (!prev_blank && !current.empty()) {
        sentences.push_back(std::move(current));
        current.clear();
      }
      prev_blank = true;
      continue;
    }
    prev_blank = false;
    for (auto& tok : text::split_whitespace(line)) {
      const bool end = ends_sentence(tok);
      current.push_back(std::move(tok));
      if (end) {
        sentences.push_back(std::move(current));
        current.clear();
      }
    }
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  return sentences;
}

std::vector<std::string> chunk_text(std::string_view input, std::size_t max_tokens,
                                    std::vector<std::string>* warnings) {
  if (max_tokens == 0) throw ContractError("chunk size must be positive");
  std::vector<std::string> chunks;
  std::vector<std::string> current;
  auto flush = [&] {
    if (!current.empty()) {
      chunks.push_back(join(current, 0, current.size()));
      current.clear();
    }
  };
  for (auto& sentence : split_sentences(input)) {
    if (sentence.size() > max_tokens) {
      if (warnings) {
        warnings->push_back("sentence of " + std::to_string(sentence.size()) +
                            " tokens exceeds chunk size " + std::to_string(max_tokens) +
                            "; hard-splitting");
      }
      flush();
      std::size_t pos = 0;
      for (; pos + max_tokens <= sentence.size(); pos += max_tokens) {
        chunks.push_back(join(sentence, pos, pos + max_tokens));
      }
      current.assign(sentence.begin() + static_cast<std::ptrdiff_t>(pos), sentence.end());
      continue;
    }
    if (current.size() + sentence.size() > max_tokens) flush();
    current.insert(current.end(), std::make_move_iterator(sentence.begin()),
                   std::make_move_iterator(sentence.end()));
  }
  flush();
  return chunks;
}

PassageIndex build_index(const std::vector<Document>& corpus, Embedder& embedder,
                         std::size_t chunk_tokens) {
  if (corpus.empty()) throw ContractError("cannot build an index from an empty corpus");
  PassageIndex index;
  index.chunk_tokens = chunk_tokens;
  index.embedder = embedder.name();
  std::vector<std::string> texts;
  for (const auto& doc : corpus) {
    std::vector<std::string> warnings;
    auto pieces = chunk_text(doc.text, chunk_tokens, &warnings);
    for (const auto& w : warnings) spdlog::warn("document '{}': {}", doc.id, w);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      Chunk c;
      c.id = doc.id + "#" + std::to_string(i);
      c.doc_id = doc.id;
      c.token_count = text::split_whitespace(pieces[i]).size();
      c.text = std::move(pieces[i]);
      texts.push_back(c.text);
      index.chunks.push_back(std::move(c));
    }
  }
  constexpr std::size_t kBatch = 64;
  for (std::size_t start = 0; start < texts.size(); start += kBatch) {
    const std::size_t end = std::min(texts.size(), start + kBatch);
    std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                   texts.begin() + static_cast<std::ptrdiff_t>(end));
    auto vecs = embedder.embed(batch);
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      index.chunks[start + i].dense = std::move(vecs[i].dense);
    }
  }
  return index;
}

std::vector<RetrievedPassage> retrieve(const PassageIndex& index, Embedder& embedder,
                                       std::string_view query, std::size_t top_k) {
  if (index.empty()) throw RetrievalError("retrieval from an empty index");
  if (top_k < 1) throw ContractError("top_k must be at least 1");
  const auto q = embed_one(embedder, std::string(query));
  std::vector<double> scores(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) scores[i] = cosine(q.dense, index.chunks[i].dense);
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min(top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  std::vector<RetrievedPassage> out;
  out.reserve(k);
  for (std::size_t r = 0; r < k; ++r) {
    const auto& c = index.chunks[order[r]];
    out.push_back({std::string(query), c.id, c.text, scores[order[r]], false});
  }
  return out;
}

void save_index(const PassageIndex& index, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write index: " + path);
  json header = {{"format", "trustroute-index"},
                 {"version", kIndexFormatVersion},
                 {"chunk_tokens", index.chunk_tokens},
                 {"embedder", index.embedder},
                 {"chunks", index.size()}};
  out << header.dump() << '\n';
  for (const auto& c : index.chunks) {
    json line = {{"id", c.id},
                 {"doc", c.doc_id},
                 {"tokens", c.token_count},
                 {"text", c.text},
                 {"dense", c.dense}};
    out << line.dump() << '\n';
  }
  if (!out) throw Error("failed writing index: " + path);
}

PassageIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open index: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("index file is empty: " + path);
  PassageIndex index;
  try {
    auto header = json::parse(line);
    if (header.value("format", "") != "trustroute-index") throw Error("not an index file: " + path);
    if (header.value("version", 0) != kIndexFormatVersion) {
      throw Error("unsupported index version in " + path);
    }
    index.chunk_tokens = header.value("chunk_tokens", kDefaultChunkTokens);
    index.embedder = header.value("embedder", "");
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      auto j = json::parse(line);
      Chunk c;
      c.id = j.at("id").get<std::string>();
      c.doc_id = j.value("doc", "");
      c.token_count = j.value("tokens", std::size_t{0});
      c.text = j.at("text").get<std::string>();
      c.dense = j.at("dense").get<std::vector<float>>();
      index.chunks.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw Error("malformed index " + path + ": " + e.what());
  }
  return index;
}

std::vector<Document> load_corpus_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ContractError("corpus directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".txt" || ext == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  for (const auto& p : files) {
    std::ifstream in(p, std::ios::binary);
    if (p.extension() == ".txt") {
      std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      if (!text::trim(body).empty()) docs.push_back({p.stem().string(), std::move(body)});
      continue;
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      try {
        auto j = json::parse(line);
        Document d;
        d.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>()
                                                        : j["id"].dump())
                                : p.stem().string() + ":" + std::to_string(lineno);
        d.text = j.at("text").get<std::string>();
        if (!text::trim(d.text).empty()) docs.push_back(std::move(d));
      } catch (const json::exception& e) {
        throw ContractError(p.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }
  if (docs.empty()) throw ContractError("corpus directory has no documents: " + dir);
  return docs;
}

}  // namespace trustroute
