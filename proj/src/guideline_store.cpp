#include "echoreason/guideline_store.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "echoreason/error.hpp"
#include "echoreason/http.hpp"
#include "echoreason/text.hpp"

namespace echoreason {

namespace fs = std::filesystem;

namespace {

constexpr char kIndexMagic[4] = {'E', 'G', 'I', 'X'};
constexpr std::uint32_t kIndexVersion = 1;

// Byte offsets of every code point start, plus the end offset.
std::vector<std::size_t> code_point_offsets(std::string_view s) {
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) offsets.push_back(i);
  }
  offsets.push_back(s.size());
  return offsets;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t get_uint(std::istream& in, int bytes) {
  unsigned char b[8] = {};
  if (!in.read(reinterpret_cast<char*>(b), bytes)) throw Error(Errc::FormatError, "truncated index file");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  const std::uint64_t bits = get_uint(in, 8);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string get_str(std::istream& in) {
  const auto n = static_cast<std::size_t>(get_uint(in, 4));
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw Error(Errc::FormatError, "truncated index file");
  }
  return s;
}

}  // namespace

std::vector<Passage> chunk(const GuidelineDoc& doc, const ChunkOptions& options) {
  if (options.size == 0 || options.overlap >= options.size) {
    throw Error(Errc::InvalidChunking, "require 0 <= overlap < size (size " + std::to_string(options.size) +
                                           ", overlap " + std::to_string(options.overlap) + ")");
  }
  const auto offsets = code_point_offsets(doc.body);
  const std::size_t length = offsets.size() - 1;
  const std::size_t stride = options.size - options.overlap;

  std::vector<Passage> passages;
  for (std::size_t start = 0;; start += stride) {
    const std::size_t stop = std::min(start + options.size, length);
    Passage p;
    p.passage_id = doc.doc_id + "#" + std::to_string(passages.size());
    p.doc_id = doc.doc_id;
    p.begin = offsets[start];
    p.end = offsets[stop];
    p.text = doc.body.substr(p.begin, p.end - p.begin);
    passages.push_back(std::move(p));
    if (stop >= length) break;
  }
  return passages;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

GuidelineIndex GuidelineIndex::build(std::vector<Passage> passages, std::vector<GuidelineDoc> documents,
                                     IndexOptions options) {
  if (passages.empty()) throw Error(Errc::EmptyCorpus, "no passages to index");
  GuidelineIndex index;
  index.passages_ = std::move(passages);
  index.documents_ = std::move(documents);
  index.options_ = std::move(options);

  double total = 0.0;
  for (std::uint32_t i = 0; i < index.passages_.size(); ++i) {
    const auto tokens = tokenize(index.passages_[i].text);
    index.lengths_.push_back(static_cast<double>(tokens.size()));
    total += static_cast<double>(tokens.size());
    std::unordered_map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (auto& [term, count] : tf) index.postings_[term].push_back({i, count});
  }
  index.average_length_ = total / static_cast<double>(index.passages_.size());
  const double n = static_cast<double>(index.passages_.size());
  for (auto& [term, list] : index.postings_) {
    std::sort(list.begin(), list.end(), [](const Posting& a, const Posting& b) { return a.passage < b.passage; });
    const double df = static_cast<double>(list.size());
    index.idf_[term] = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  }
  return index;
}

std::vector<SearchHit> GuidelineIndex::search(std::string_view query, std::size_t k) const {
  const std::string_view phrase = trim(query);
  if (phrase.empty()) throw Error(Errc::EmptyQuery, "query is empty");
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be at least 1");

  const auto terms = tokenize(phrase);
  const double k1 = options_.bm25.k1;
  const double b = options_.bm25.b;
  std::vector<double> scores(passages_.size(), 0.0);
  double ceiling = 1.0;
  for (const auto& term : terms) {
    const auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double idf = idf_.at(term);
    ceiling += idf * (k1 + 1.0);
    for (const auto& post : it->second) {
      const double tf = post.tf;
      const double norm = average_length_ > 0.0 ? k1 * (1.0 - b + b * lengths_[post.passage] / average_length_) : k1;
      scores[post.passage] += idf * (tf * (k1 + 1.0)) / (tf + norm);
    }
  }
  for (std::size_t i = 0; i < passages_.size(); ++i) {
    if (passages_[i].text.find(phrase) != std::string::npos) scores[i] += ceiling;
  }
  if (options_.dense) {
    const auto sims = options_.dense->similarities(phrase, passages_);
    for (std::size_t i = 0; i < passages_.size() && i < sims.size(); ++i) {
      scores[i] += options_.dense_weight * std::max(0.0, sims[i]);
    }
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < passages_.size(); ++i) {
    if (scores[i] > 0.0) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    if (scores[a] != scores[c]) return scores[a] > scores[c];
    if (passages_[a].doc_id != passages_[c].doc_id) return passages_[a].doc_id < passages_[c].doc_id;
    if (passages_[a].begin != passages_[c].begin) return passages_[a].begin < passages_[c].begin;
    return a < c;
  });
  if (order.size() > k) order.resize(k);

  std::vector<SearchHit> hits;
  hits.reserve(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& p = passages_[order[r]];
    hits.push_back({p, title_of(p.doc_id), scores[order[r]], static_cast<int>(r + 1)});
  }
  return hits;
}

std::string GuidelineIndex::title_of(const std::string& doc_id) const {
  for (const auto& d : documents_) {
    if (d.doc_id == doc_id) return d.title;
  }
  return doc_id;
}

void GuidelineIndex::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(kIndexMagic, 4);
  put_u32(out, kIndexVersion);
  put_f64(out, options_.bm25.k1);
  put_f64(out, options_.bm25.b);
  put_u32(out, static_cast<std::uint32_t>(documents_.size()));
  for (const auto& d : documents_) {
    put_str(out, d.doc_id);
    put_str(out, d.title);
    put_str(out, d.source);
    put_str(out, d.body);
  }
  put_u32(out, static_cast<std::uint32_t>(passages_.size()));
  for (const auto& p : passages_) {
    put_str(out, p.passage_id);
    put_str(out, p.doc_id);
    put_u64(out, p.begin);
    put_u64(out, p.end);
    put_str(out, p.text);
  }
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
}

GuidelineIndex GuidelineIndex::load(const fs::path& path, IndexOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kIndexMagic, 4) != 0) {
    throw Error(Errc::FormatError, path.string() + " is not a guideline index");
  }
  const auto version = get_uint(in, 4);
  if (version != kIndexVersion) {
    throw Error(Errc::FormatError, "unsupported index version " + std::to_string(version));
  }
  options.bm25.k1 = get_f64(in);
  options.bm25.b = get_f64(in);
  std::vector<GuidelineDoc> docs(static_cast<std::size_t>(get_uint(in, 4)));
  for (auto& d : docs) {
    d.doc_id = get_str(in);
    d.title = get_str(in);
    d.source = get_str(in);
    d.body = get_str(in);
  }
  std::vector<Passage> passages(static_cast<std::size_t>(get_uint(in, 4)));
  for (auto& p : passages) {
    p.passage_id = get_str(in);
    p.doc_id = get_str(in);
    p.begin = static_cast<std::size_t>(get_uint(in, 8));
    p.end = static_cast<std::size_t>(get_uint(in, 8));
    p.text = get_str(in);
  }
  return build(std::move(passages), std::move(docs), std::move(options));
}

std::vector<GuidelineDoc> ingest_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::IoError, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = to_lower(entry.path().extension().string());
    if (ext == ".txt" || ext == ".md" || ext == ".markdown") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<GuidelineDoc> docs;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    GuidelineDoc doc;
    doc.body = buf.str();
    if (trim(doc.body).empty()) continue;
    const auto rel = fs::relative(file, dir);
    doc.source = rel.generic_string();
    doc.doc_id = (rel.parent_path() / rel.stem()).generic_string();
    std::istringstream lines(doc.body);
    std::string line;
    while (std::getline(lines, line)) {
      auto t = trim(line);
      if (t.empty()) continue;
      while (!t.empty() && t.front() == '#') t.remove_prefix(1);
      doc.title = std::string(trim(t.substr(0, 120)));
      break;
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

GuidelineIndex build_index_from_documents(std::vector<GuidelineDoc> documents, const ChunkOptions& chunking,
                                          IndexOptions options) {
  std::vector<Passage> passages;
  for (const auto& d : documents) {
    auto chunks = chunk(d, chunking);
    passages.insert(passages.end(), std::make_move_iterator(chunks.begin()), std::make_move_iterator(chunks.end()));
  }
  return GuidelineIndex::build(std::move(passages), std::move(documents), std::move(options));
}

namespace {

class RemoteEmbeddingScorer final : public DenseScorer {
 public:
  explicit RemoteEmbeddingScorer(EmbeddingEndpoint endpoint)
      : endpoint_(std::move(endpoint)), http_(parse_endpoint(endpoint_.url)) {}

  std::vector<double> similarities(std::string_view query, std::span<const Passage> passages) const override {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (passage_vectors_.size() != passages.size()) {
        std::vector<std::string> texts;
        for (const auto& p : passages) texts.push_back(p.text);
        passage_vectors_ = embed(texts);
      }
    }
    const auto q = embed({std::string(query)});
    std::vector<double> out;
    for (const auto& v : passage_vectors_) out.push_back(cosine(q.front(), v));
    return out;
  }

 private:
  static double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    return (na > 0 && nb > 0) ? dot / std::sqrt(na * nb) : 0.0;
  }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& inputs) const {
    json body = {{"input", inputs}};
    if (!endpoint_.model.empty()) body["model"] = endpoint_.model;
    const auto res = http_post(http_, endpoint_.path, dump_json(body), "application/json", {},
                               std::chrono::milliseconds(endpoint_.timeout_ms));
    if (!res.received() || res.status != 200) {
      throw Error(Errc::ExecutionFailure, "embedding endpoint failed: " +
                                              (res.received() ? std::to_string(res.status) : res.transport_error));
    }
    const json doc = json::parse(res.body, nullptr, false);
    std::vector<std::vector<double>> vectors;
    try {
      for (const auto& item : doc.at("data")) vectors.push_back(item.at("embedding").get<std::vector<double>>());
    } catch (const json::exception& e) {
      throw Error(Errc::FormatError, std::string("embedding response: ") + e.what());
    }
    if (vectors.size() != inputs.size()) throw Error(Errc::FormatError, "embedding count mismatch");
    return vectors;
  }

  EmbeddingEndpoint endpoint_;
  HttpEndpoint http_;
  mutable std::mutex mutex_;
  mutable std::vector<std::vector<double>> passage_vectors_;
};

}  // namespace

std::shared_ptr<const DenseScorer> make_remote_embedding_scorer(EmbeddingEndpoint endpoint) {
  return std::make_shared<RemoteEmbeddingScorer>(std::move(endpoint));
}

}  // namespace echoreason
