#include "cbmrag/service/session.hpp"

#include <cstdio>
#include <random>

#include "cbmrag/cbm/serialization.hpp"
#include "cbmrag/error.hpp"

namespace cbmrag::service {

namespace {

constexpr int kSessionFormatVersion = 1;

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key) || j.at(key).is_null()) {
    out.reset();
    return;
  }
  out = j.at(key).get<T>();
}

bool is_session_id(const std::string& id) {
  if (id.size() != 36) return false;
  for (std::size_t i = 0; i < id.size(); ++i) {
    const char c = id[i];
    if (i == 8 || i == 13 || i == 18 || i == 23) {
      if (c != '-') return false;
    } else if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) {
      return false;
    }
  }
  return true;
}

std::string now_string() { return agents::format_timestamp(std::chrono::system_clock::now()); }

}  // namespace

void to_json(nlohmann::json& j, const ImageRef& r) {
  j = nlohmann::json{{"file", r.file}, {"media_type", r.media_type}};
}

void from_json(const nlohmann::json& j, ImageRef& r) {
  j.at("file").get_to(r.file);
  j.at("media_type").get_to(r.media_type);
}

void to_json(nlohmann::json& j, const ConceptState& s) {
  j = nlohmann::json{{"vector", s.vector}, {"original", s.original}, {"overridden", s.overridden}};
}

void from_json(const nlohmann::json& j, ConceptState& s) {
  j.at("vector").get_to(s.vector);
  j.at("original").get_to(s.original);
  j.at("overridden").get_to(s.overridden);
  if (s.original.size() != s.vector.size() || s.overridden.size() != s.vector.size()) {
    throw Error(Errc::storage_failure, "concept state lengths disagree");
  }
}

void to_json(nlohmann::json& j, const Session& s) {
  j = nlohmann::json{{"format_version", kSessionFormatVersion},
                     {"id", s.id},
                     {"image", optional_json(s.image)},
                     {"concept_state", optional_json(s.concept_state)},
                     {"similarity", optional_json(s.similarity)},
                     {"prediction", optional_json(s.prediction)},
                     {"report", optional_json(s.report)},
                     {"chat_history", s.chat_history},
                     {"created_at", s.created_at},
                     {"updated_at", s.updated_at}};
}

void from_json(const nlohmann::json& j, Session& s) {
  if (j.value("format_version", 0) != kSessionFormatVersion) {
    throw Error(Errc::storage_failure, "unsupported session format_version");
  }
  j.at("id").get_to(s.id);
  read_optional(j, "image", s.image);
  read_optional(j, "concept_state", s.concept_state);
  read_optional(j, "similarity", s.similarity);
  read_optional(j, "prediction", s.prediction);
  read_optional(j, "report", s.report);
  j.at("chat_history").get_to(s.chat_history);
  j.at("created_at").get_to(s.created_at);
  j.at("updated_at").get_to(s.updated_at);
}

std::string new_uuid() {
  static thread_local std::mt19937_64 rng{[] {
    std::random_device rd;
    std::seed_seq seq{rd(), rd(), rd(), rd(), rd(), rd(), rd(), rd()};
    return std::mt19937_64(seq);
  }()};
  std::uint64_t hi = rng();
  std::uint64_t lo = rng();
  hi = (hi & 0xffffffffffff0fffULL) | 0x0000000000004000ULL;  // version 4
  lo = (lo & 0x3fffffffffffffffULL) | 0x8000000000000000ULL;  // RFC 4122 variant
  char buf[37];
  std::snprintf(buf, sizeof buf, "%08x-%04x-%04x-%04x-%012llx",
                static_cast<unsigned>(hi >> 32), static_cast<unsigned>((hi >> 16) & 0xffff),
                static_cast<unsigned>(hi & 0xffff), static_cast<unsigned>(lo >> 48),
                static_cast<unsigned long long>(lo & 0xffffffffffffULL));
  return buf;
}

SessionRepository::SessionRepository(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(Errc::storage_failure, "cannot create " + dir_.string() + ": " + ec.message());
}

std::shared_ptr<SessionSlot> SessionRepository::make_slot(Session session) const {
  auto slot = std::make_shared<SessionSlot>();
  try {
    slot->uploads = retrieval::RetrievalStore::open(dir_ / (session.id + ".uploads.json"),
                                                    retrieval::kUserUploadsStore);
  } catch (const Error& e) {
    throw Error(Errc::storage_failure, "session " + session.id + " uploads: " + e.what());
  }
  slot->session = std::move(session);
  return slot;
}

void SessionRepository::load_all() {
  std::map<std::string, std::shared_ptr<SessionSlot>> loaded;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir_, ec)) {
    const auto name = entry.path().filename().string();
    if (name.size() != 41 || name.substr(36) != ".json") continue;
    if (!is_session_id(name.substr(0, 36))) continue;
    Session s;
    try {
      nlohmann::json::parse(util::read_text_file(entry.path())).get_to(s);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::storage_failure, entry.path().string() + ": " + e.what());
    } catch (const Error& e) {
      throw Error(Errc::storage_failure, entry.path().string() + ": " + e.what());
    }
    auto id = s.id;
    loaded.emplace(std::move(id), make_slot(std::move(s)));
  }
  if (ec) throw Error(Errc::storage_failure, "cannot list " + dir_.string() + ": " + ec.message());
  std::unique_lock lock(mutex_);
  slots_ = std::move(loaded);
}

std::shared_ptr<SessionSlot> SessionRepository::create() {
  Session s;
  s.id = new_uuid();
  s.created_at = now_string();
  s.updated_at = s.created_at;
  save(s);
  auto slot = make_slot(s);
  std::unique_lock lock(mutex_);
  slots_.emplace(s.id, slot);
  return slot;
}

std::shared_ptr<SessionSlot> SessionRepository::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = slots_.find(id);
  if (it == slots_.end()) throw Error(Errc::unknown_session, "no session '" + id + "'");
  return it->second;
}

std::size_t SessionRepository::size() const {
  std::shared_lock lock(mutex_);
  return slots_.size();
}

void SessionRepository::save(const Session& session) const {
  try {
    util::write_file_atomic(dir_ / (session.id + ".json"), nlohmann::json(session).dump());
  } catch (const Error& e) {
    throw Error(Errc::storage_failure, e.what());
  }
}

void SessionRepository::save_image(const std::string& id,
                                   std::span<const std::uint8_t> bytes) const {
  try {
    util::write_file_atomic(dir_ / (id + ".image"),
                            std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                             bytes.size()));
  } catch (const Error& e) {
    throw Error(Errc::storage_failure, e.what());
  }
}

util::Bytes SessionRepository::load_image(const Session& session) const {
  if (!session.image) throw Error(Errc::no_analysis, "session has no image");
  try {
    return util::read_binary_file(dir_ / session.image->file);
  } catch (const Error& e) {
    throw Error(Errc::storage_failure, e.what());
  }
}

}  // namespace cbmrag::service
