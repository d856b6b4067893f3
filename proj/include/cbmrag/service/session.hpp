#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbmrag/agents/pipeline.hpp"
#include "cbmrag/cbm/bottleneck.hpp"
#include "cbmrag/cbm/classifier.hpp"
#include "cbmrag/providers/types.hpp"
#include "cbmrag/retrieval/store.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::service {

struct ImageRef {
  std::string file;  // name inside the session directory
  std::string media_type;

  bool operator==(const ImageRef&) const = default;
};

struct ConceptState {
  cbm::ConceptVector vector;          // normalized holds the values in use
  std::vector<double> original;       // normalized values computed from the image
  std::vector<bool> overridden;

  bool operator==(const ConceptState&) const = default;
};

struct Session {
  std::string id;
  std::optional<ImageRef> image;
  std::optional<ConceptState> concept_state;
  std::optional<cbm::SimilarityMatrix> similarity;
  std::optional<cbm::Prediction> prediction;
  std::optional<agents::ReportBundle> report;
  std::vector<providers::ChatMessage> chat_history;
  std::string created_at;
  std::string updated_at;

  bool operator==(const Session&) const = default;
};

void to_json(nlohmann::json& j, const Session& s);
void from_json(const nlohmann::json& j, Session& s);

// Random RFC 4122 version-4 UUID.
std::string new_uuid();

// One live session: state plus its lock and upload store. Mutations take the
// lock exclusively, reads take it shared.
struct SessionSlot {
  mutable std::shared_mutex mutex;
  Session session;
  std::shared_ptr<retrieval::RetrievalStore> uploads;
  std::vector<providers::ChatMessage> last_chat_prompt;
};

// Sessions persisted as <dir>/<id>.json (atomic replace), images as
// <dir>/<id>.image and uploads as <dir>/<id>.uploads.json.
class SessionRepository {
 public:
  explicit SessionRepository(std::filesystem::path dir);

  // Reloads every session file in the directory.
  // Errors: storage_failure.
  void load_all();

  std::shared_ptr<SessionSlot> create();
  // Errors: unknown_session.
  std::shared_ptr<SessionSlot> get(const std::string& id) const;
  std::size_t size() const;

  // Caller holds the slot lock. Errors: storage_failure.
  void save(const Session& session) const;
  void save_image(const std::string& id, std::span<const std::uint8_t> bytes) const;
  util::Bytes load_image(const Session& session) const;

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::shared_ptr<SessionSlot> make_slot(Session session) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<SessionSlot>> slots_;
};

}  // namespace cbmrag::service
