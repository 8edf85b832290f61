#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace echoreason {

struct GuidelineDoc {
  std::string doc_id;
  std::string title;
  std::string source;
  std::string body;
};

// A window of a document body. `begin`/`end` are byte offsets into the body;
// chunk sizes are counted in code points so windows never split a UTF-8
// sequence.
struct Passage {
  std::string passage_id;
  std::string doc_id;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string text;
};

struct ChunkOptions {
  std::size_t size = 512;
  std::size_t overlap = 128;
};

// Consecutive windows of `size` characters starting every size - overlap
// characters; the last window is cut at the end of the body.
std::vector<Passage> chunk(const GuidelineDoc& doc, const ChunkOptions& options = {});

// Lowercased ASCII alphanumeric runs; everything else separates tokens.
std::vector<std::string> tokenize(std::string_view text);

struct SearchHit {
  Passage passage;
  std::string title;
  double score = 0.0;
  int rank = 0;
};

// Optional semantic scorer added on top of the lexical score.
class DenseScorer {
 public:
  virtual ~DenseScorer() = default;
  // Similarity in [-1, 1] of the query to each passage, same order.
  virtual std::vector<double> similarities(std::string_view query, std::span<const Passage> passages) const = 0;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct IndexOptions {
  Bm25Params bm25;
  std::shared_ptr<const DenseScorer> dense;
  double dense_weight = 1.0;
};

// Immutable BM25 index over passages. Scores are
//   sum over query tokens t present in p of idf(t) * tf(k1+1) / (tf + k1(1 - b + b dl/avgdl))
// with idf(t) = ln(1 + (N - n_t + 0.5) / (n_t + 0.5)), plus a bonus larger
// than any lexical score when the trimmed query occurs verbatim in the
// passage. Only positive scores are hits; ties break by (doc_id, begin).
class GuidelineIndex {
 public:
  static GuidelineIndex build(std::vector<Passage> passages, std::vector<GuidelineDoc> documents = {},
                              IndexOptions options = {});

  std::vector<SearchHit> search(std::string_view query, std::size_t k = 5) const;

  std::size_t size() const noexcept { return passages_.size(); }
  const std::vector<Passage>& passages() const noexcept { return passages_; }
  const std::vector<GuidelineDoc>& documents() const noexcept { return documents_; }
  const Bm25Params& bm25() const noexcept { return options_.bm25; }
  std::string title_of(const std::string& doc_id) const;

  // Single binary file with a magic/version header.
  void save(const std::filesystem::path& path) const;
  static GuidelineIndex load(const std::filesystem::path& path, IndexOptions options = {});

 private:
  struct Posting {
    std::uint32_t passage;
    std::uint32_t tf;
  };

  GuidelineIndex() = default;

  std::vector<Passage> passages_;
  std::vector<GuidelineDoc> documents_;
  IndexOptions options_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::unordered_map<std::string, double> idf_;
  std::vector<double> lengths_;
  double average_length_ = 0.0;
};

// Plain-text and Markdown files under `dir`, sorted by relative path.
std::vector<GuidelineDoc> ingest_directory(const std::filesystem::path& dir);

GuidelineIndex build_index_from_documents(std::vector<GuidelineDoc> documents, const ChunkOptions& chunking = {},
                                          IndexOptions options = {});

struct EmbeddingEndpoint {
  std::string url;  // e.g. http://localhost:8000
  std::string path = "/v1/embeddings";
  std::string model;
  int timeout_ms = 10000;
};

// Dense scorer backed by an OpenAI-compatible embeddings endpoint.
// Passage embeddings are fetched once and cached.
std::shared_ptr<const DenseScorer> make_remote_embedding_scorer(EmbeddingEndpoint endpoint);

}  // namespace echoreason
