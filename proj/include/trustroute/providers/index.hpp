#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "trustroute/model.hpp"
#include "trustroute/providers/embedding.hpp"

namespace trustroute {

struct Document {
  std::string id;
  std::string text;
};

struct Chunk {
  std::string id;  // "<doc id>#<ordinal>"
  std::string doc_id;
  std::string text;
  std::size_t token_count = 0;
  std::vector<float> dense;
};

inline constexpr std::size_t kDefaultChunkTokens = 256;
inline constexpr int kIndexFormatVersion = 1;

/// Dense passage index. Read-only once built, so lookups are thread-safe.
struct PassageIndex {
  std::vector<Chunk> chunks;
  std::size_t chunk_tokens = kDefaultChunkTokens;
  std::string embedder;

  bool empty() const { return chunks.empty(); }
  std::size_t size() const { return chunks.size(); }
};

/// Sentences as whitespace-token lists. Paragraph breaks (blank lines) and
/// tokens ending in '.', '!' or '?' (before closing quotes/brackets) end a
/// sentence.
std::vector<std::vector<std::string>> split_sentences(std::string_view text);

/// Greedy packing of whole sentences into chunks of at most `max_tokens`
/// whitespace tokens. A sentence longer than `max_tokens` is hard-split and
/// a warning is appended to `warnings`.
std::vector<std::string> chunk_text(std::string_view text, std::size_t max_tokens,
                                    std::vector<std::string>* warnings = nullptr);

/// Throws ContractError on an empty corpus.
PassageIndex build_index(const std::vector<Document>& corpus, Embedder& embedder,
                         std::size_t chunk_tokens = kDefaultChunkTokens);

/// Top-k chunks by dense cosine, descending; ties keep index order.
/// Throws RetrievalError on an empty index, ContractError when top_k < 1.
std::vector<RetrievedPassage> retrieve(const PassageIndex& index, Embedder& embedder,
                                       std::string_view query, std::size_t top_k = 1);

/// Line-delimited JSON: a header line {"format", "version", ...} followed
/// by one chunk per line.
void save_index(const PassageIndex& index, const std::string& path);
PassageIndex load_index(const std::string& path);

/// *.txt files become one document each (id = file stem); *.jsonl files
/// contribute one document per {"id", "text"} line. Files are visited in
/// lexicographic path order.
std::vector<Document> load_corpus_dir(const std::string& dir);

}  // namespace trustroute
