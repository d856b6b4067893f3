#include "cbmrag/retrieval/store.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "cbmrag/error.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::retrieval {

using nlohmann::json;

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

bool ranks_before(const RetrievalHit& a, const RetrievalHit& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.chunk.doc_id != b.chunk.doc_id) return a.chunk.doc_id < b.chunk.doc_id;
  return a.chunk.chunk_index < b.chunk.chunk_index;
}

}  // namespace

std::vector<RetrievalHit> top_k(const ChunkEmbeddingIndex& index,
                                const providers::EmbeddingVector& query, std::size_t k) {
  if (k == 0) throw Error(Errc::invalid_argument, "k must be >= 1");
  if (index.entries.empty()) return {};
  if (query.dim() != index.dim) {
    throw Error(Errc::dimension_mismatch, "query dimension " + std::to_string(query.dim()) +
                                              " != store dimension " + std::to_string(index.dim));
  }
  std::vector<RetrievalHit> scored;
  scored.reserve(index.entries.size());
  for (const auto& e : index.entries) {
    scored.push_back({e.chunk, cosine(query.values, e.vector.values)});
  }
  const auto keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), ranks_before);
  scored.resize(keep);
  return scored;
}

void persist_store(const ChunkEmbeddingIndex& index, const std::filesystem::path& path) {
  json entries = json::array();
  for (const auto& e : index.entries) {
    entries.push_back({{"doc_id", e.chunk.doc_id},
                       {"chunk_index", e.chunk.chunk_index},
                       {"start", e.chunk.start},
                       {"end", e.chunk.end},
                       {"text", e.chunk.text},
                       {"vector", e.vector.values}});
  }
  json doc{{"format_version", kStoreFormatVersion},
           {"store_id", index.store_id},
           {"dim", index.dim},
           {"entries", std::move(entries)}};
  // nlohmann writes the shortest decimal that round-trips each double exactly.
  util::write_file_atomic(path, doc.dump() + "\n");
}

ChunkEmbeddingIndex load_store(const std::filesystem::path& path) {
  const auto text = util::read_text_file(path);
  const auto corrupt = [&](const std::string& why) {
    return Error(Errc::corrupt_store, "store " + path.string() + ": " + why);
  };
  try {
    const auto doc = json::parse(text);
    const auto version = doc.at("format_version").get<int>();
    if (version != kStoreFormatVersion) {
      throw corrupt("unsupported format_version " + std::to_string(version));
    }
    ChunkEmbeddingIndex index;
    doc.at("store_id").get_to(index.store_id);
    doc.at("dim").get_to(index.dim);
    std::set<std::pair<std::string, std::size_t>> keys;
    for (const auto& e : doc.at("entries")) {
      IndexEntry entry;
      e.at("doc_id").get_to(entry.chunk.doc_id);
      e.at("chunk_index").get_to(entry.chunk.chunk_index);
      e.at("start").get_to(entry.chunk.start);
      e.at("end").get_to(entry.chunk.end);
      e.at("text").get_to(entry.chunk.text);
      e.at("vector").get_to(entry.vector.values);
      if (entry.chunk.end <= entry.chunk.start ||
          utf8_length(entry.chunk.text) != entry.chunk.end - entry.chunk.start) {
        throw corrupt("chunk span does not match its text");
      }
      if (entry.vector.dim() != index.dim || index.dim == 0) {
        throw corrupt("vector length does not match store dim");
      }
      for (double x : entry.vector.values) {
        if (!std::isfinite(x)) throw corrupt("non-finite vector value");
      }
      if (!keys.emplace(entry.chunk.doc_id, entry.chunk.chunk_index).second) {
        throw corrupt("duplicate (doc_id, chunk_index)");
      }
      index.entries.push_back(std::move(entry));
    }
    return index;
  } catch (const json::exception& e) {
    throw corrupt(e.what());
  }
}

RetrievalStore::RetrievalStore(std::string store_id, std::size_t dim,
                               std::optional<std::filesystem::path> backing_file)
    : store_id_(std::move(store_id)), backing_file_(std::move(backing_file)) {
  index_.store_id = store_id_;
  index_.dim = dim;
}

RetrievalStore::RetrievalStore(ChunkEmbeddingIndex index,
                               std::optional<std::filesystem::path> backing_file)
    : store_id_(index.store_id), backing_file_(std::move(backing_file)), index_(std::move(index)) {}

std::shared_ptr<RetrievalStore> RetrievalStore::open(const std::filesystem::path& path,
                                                     std::string store_id, std::size_t dim) {
  if (std::filesystem::exists(path)) {
    auto index = load_store(path);
    if (index.store_id != store_id) {
      throw Error(Errc::corrupt_store, "store " + path.string() + " holds '" + index.store_id +
                                           "', expected '" + store_id + "'");
    }
    return std::make_shared<RetrievalStore>(std::move(index), path);
  }
  return std::make_shared<RetrievalStore>(std::move(store_id), dim, path);
}

std::size_t RetrievalStore::size() const {
  std::shared_lock lock(mutex_);
  return index_.entries.size();
}

std::size_t RetrievalStore::dim() const {
  std::shared_lock lock(mutex_);
  return index_.dim;
}

bool RetrievalStore::contains_document(const std::string& doc_id) const {
  std::shared_lock lock(mutex_);
  return std::any_of(index_.entries.begin(), index_.entries.end(),
                     [&](const IndexEntry& e) { return e.chunk.doc_id == doc_id; });
}

std::size_t RetrievalStore::ingest_document(const std::string& doc_id, std::string_view text,
                                            providers::TextEmbedder& embedder,
                                            const ChunkingParams& params) {
  if (doc_id.empty()) throw Error(Errc::invalid_argument, "doc_id must not be empty");
  const auto duplicate = [&] {
    return Error(Errc::duplicate_document,
                 "document '" + doc_id + "' already exists in store '" + store_id_ + "'");
  };
  if (contains_document(doc_id)) throw duplicate();

  auto chunks = chunk_text(text, params, doc_id);
  if (chunks.empty()) return 0;
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) texts.push_back(c.text);
  // Embedding happens outside the lock; the duplicate check is repeated below.
  auto vectors = embedder.embed_text(texts);

  std::unique_lock lock(mutex_);
  if (std::any_of(index_.entries.begin(), index_.entries.end(),
                  [&](const IndexEntry& e) { return e.chunk.doc_id == doc_id; })) {
    throw duplicate();
  }
  const auto d = vectors.front().dim();
  if (index_.dim != 0 && index_.dim != d) {
    throw Error(Errc::dimension_mismatch, "store '" + store_id_ + "' has dimension " +
                                              std::to_string(index_.dim) + ", embedder returned " +
                                              std::to_string(d));
  }
  const auto old_size = index_.entries.size();
  const auto old_dim = index_.dim;
  index_.dim = d;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    index_.entries.push_back({std::move(chunks[i]), std::move(vectors[i])});
  }
  if (backing_file_) {
    try {
      persist_store(index_, *backing_file_);
    } catch (...) {
      index_.entries.resize(old_size);
      index_.dim = old_dim;
      throw;
    }
  }
  return index_.entries.size() - old_size;
}

std::size_t RetrievalStore::ingest_media(const std::string& doc_id,
                                         std::span<const std::uint8_t> media,
                                         std::string_view media_type,
                                         providers::Transcriber& transcriber,
                                         providers::TextEmbedder& embedder,
                                         const ChunkingParams& params) {
  if (contains_document(doc_id)) {
    throw Error(Errc::duplicate_document,
                "document '" + doc_id + "' already exists in store '" + store_id_ + "'");
  }
  const auto transcript = transcriber.transcribe(media, media_type);
  return ingest_document(doc_id, transcript.text, embedder, params);
}

std::vector<RetrievalHit> RetrievalStore::query(const std::string& query_text, std::size_t k,
                                                providers::TextEmbedder& embedder) const {
  if (k == 0) throw Error(Errc::invalid_argument, "k must be >= 1");
  if (size() == 0) return {};
  const std::vector<std::string> input{query_text};
  const auto q = embedder.embed_text(input);
  return query_vector(q.front(), k);
}

std::vector<RetrievalHit> RetrievalStore::query_vector(const providers::EmbeddingVector& query,
                                                       std::size_t k) const {
  std::shared_lock lock(mutex_);
  return top_k(index_, query, k);
}

ChunkEmbeddingIndex RetrievalStore::snapshot() const {
  std::shared_lock lock(mutex_);
  return index_;
}

void RetrievalStore::persist(const std::filesystem::path& path) const {
  std::shared_lock lock(mutex_);
  persist_store(index_, path);
}

std::string store_for_label(const std::string& class_label) {
  if (class_label == "Pneumonia") return "pneumonia";
  if (class_label == "COVID-19") return "covid19";
  if (class_label == "Normal") return "normal";
  throw Error(Errc::unknown_class_label, "no knowledge store for class '" + class_label + "'");
}

StoreCatalog StoreCatalog::open_directory(const std::filesystem::path& dir, std::size_t dim) {
  StoreCatalog catalog;
  for (const auto& name : disease_store_names()) {
    catalog.add(RetrievalStore::open(dir / (name + ".json"), name, dim));
  }
  return catalog;
}

void StoreCatalog::add(std::shared_ptr<RetrievalStore> store) {
  const auto id = store->id();
  stores_[id] = std::move(store);
}

bool StoreCatalog::has(const std::string& store_id) const { return stores_.count(store_id) > 0; }

std::shared_ptr<RetrievalStore> StoreCatalog::get(const std::string& store_id) const {
  auto it = stores_.find(store_id);
  if (it == stores_.end()) throw Error(Errc::unknown_store, "unknown store '" + store_id + "'");
  return it->second;
}

std::vector<std::string> StoreCatalog::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : stores_) out.push_back(name);
  return out;
}

std::size_t StoreCatalog::ingest_document(const std::string& store_id, const std::string& doc_id,
                                          std::string_view text,
                                          providers::TextEmbedder& embedder,
                                          const ChunkingParams& params) {
  return get(store_id)->ingest_document(doc_id, text, embedder, params);
}

std::size_t StoreCatalog::ingest_media(const std::string& store_id, const std::string& doc_id,
                                       std::span<const std::uint8_t> media,
                                       std::string_view media_type,
                                       providers::Transcriber& transcriber,
                                       providers::TextEmbedder& embedder,
                                       const ChunkingParams& params) {
  return get(store_id)->ingest_media(doc_id, media, media_type, transcriber, embedder, params);
}

std::vector<RetrievalHit> StoreCatalog::query(const std::string& store_id,
                                              const std::string& query_text, std::size_t k,
                                              providers::TextEmbedder& embedder) const {
  return get(store_id)->query(query_text, k, embedder);
}

}  // namespace cbmrag::retrieval
