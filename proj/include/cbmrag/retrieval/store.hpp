#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "cbmrag/providers/provider.hpp"
#include "cbmrag/retrieval/chunker.hpp"

namespace cbmrag::retrieval {

inline constexpr int kStoreFormatVersion = 1;

struct IndexEntry {
  DocumentChunk chunk;
  providers::EmbeddingVector vector;

  bool operator==(const IndexEntry&) const = default;
};

// Plain value: the persisted content of one store. dim is 0 only while the
// store is empty and no provider dimension was known at creation.
struct ChunkEmbeddingIndex {
  std::string store_id;
  std::size_t dim = 0;
  std::vector<IndexEntry> entries;

  bool operator==(const ChunkEmbeddingIndex&) const = default;
};

struct RetrievalHit {
  DocumentChunk chunk;
  double score = 0.0;
};

// Exhaustive cosine scan. Results are sorted by score descending, ties by
// (doc_id, chunk_index) ascending; length = min(k, entries).
std::vector<RetrievalHit> top_k(const ChunkEmbeddingIndex& index,
                                const providers::EmbeddingVector& query, std::size_t k);

// Errors: io_failure.
void persist_store(const ChunkEmbeddingIndex& index, const std::filesystem::path& path);
// Errors: io_failure, corrupt_store (version, schema, or invariant violations).
ChunkEmbeddingIndex load_store(const std::filesystem::path& path);

// Thread-safe store: many concurrent readers or one writer. When a backing
// file is set, every ingestion is persisted before it returns.
class RetrievalStore {
 public:
  explicit RetrievalStore(std::string store_id, std::size_t dim = 0,
                          std::optional<std::filesystem::path> backing_file = std::nullopt);
  RetrievalStore(ChunkEmbeddingIndex index, std::optional<std::filesystem::path> backing_file);

  // Loads `path` if it exists, otherwise starts empty; either way `path`
  // becomes the backing file.
  static std::shared_ptr<RetrievalStore> open(const std::filesystem::path& path,
                                              std::string store_id, std::size_t dim = 0);

  const std::string& id() const noexcept { return store_id_; }
  std::size_t size() const;
  std::size_t dim() const;
  bool contains_document(const std::string& doc_id) const;

  // Errors: duplicate_document, invalid_encoding, invalid_chunk_params,
  // dimension_mismatch, io_failure, provider errors.
  std::size_t ingest_document(const std::string& doc_id, std::string_view text,
                              providers::TextEmbedder& embedder,
                              const ChunkingParams& params = {});
  // Transcribes the media and ingests the transcript.
  std::size_t ingest_media(const std::string& doc_id, std::span<const std::uint8_t> media,
                           std::string_view media_type, providers::Transcriber& transcriber,
                           providers::TextEmbedder& embedder, const ChunkingParams& params = {});

  // Errors: invalid_argument (k == 0), dimension_mismatch, provider errors.
  std::vector<RetrievalHit> query(const std::string& query_text, std::size_t k,
                                  providers::TextEmbedder& embedder) const;
  std::vector<RetrievalHit> query_vector(const providers::EmbeddingVector& query,
                                         std::size_t k) const;

  ChunkEmbeddingIndex snapshot() const;
  void persist(const std::filesystem::path& path) const;

 private:
  std::string store_id_;
  std::optional<std::filesystem::path> backing_file_;
  mutable std::shared_mutex mutex_;
  ChunkEmbeddingIndex index_;
};

inline const std::vector<std::string>& disease_store_names() {
  static const std::vector<std::string> names{"pneumonia", "covid19", "normal"};
  return names;
}
inline constexpr const char* kUserUploadsStore = "user_uploads";

// Canonical store for a class label ("COVID-19" -> "covid19"). Errors:
// unknown_class_label.
std::string store_for_label(const std::string& class_label);

// Named stores. Copies share the underlying stores.
class StoreCatalog {
 public:
  StoreCatalog() = default;

  // Opens <dir>/<name>.json for each disease store, creating empty ones.
  static StoreCatalog open_directory(const std::filesystem::path& dir, std::size_t dim = 0);

  void add(std::shared_ptr<RetrievalStore> store);
  bool has(const std::string& store_id) const;
  // Errors: unknown_store.
  std::shared_ptr<RetrievalStore> get(const std::string& store_id) const;
  std::vector<std::string> names() const;

  std::size_t ingest_document(const std::string& store_id, const std::string& doc_id,
                              std::string_view text, providers::TextEmbedder& embedder,
                              const ChunkingParams& params = {});
  std::size_t ingest_media(const std::string& store_id, const std::string& doc_id,
                           std::span<const std::uint8_t> media, std::string_view media_type,
                           providers::Transcriber& transcriber, providers::TextEmbedder& embedder,
                           const ChunkingParams& params = {});
  std::vector<RetrievalHit> query(const std::string& store_id, const std::string& query_text,
                                  std::size_t k, providers::TextEmbedder& embedder) const;

 private:
  std::map<std::string, std::shared_ptr<RetrievalStore>> stores_;
};

}  // namespace cbmrag::retrieval
