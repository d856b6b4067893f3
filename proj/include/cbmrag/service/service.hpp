#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "cbmrag/agents/chat.hpp"
#include "cbmrag/agents/pipeline.hpp"
#include "cbmrag/agents/prompts.hpp"
#include "cbmrag/providers/provider.hpp"
#include "cbmrag/retrieval/store.hpp"
#include "cbmrag/service/analysis.hpp"
#include "cbmrag/service/config.hpp"
#include "cbmrag/service/session.hpp"

namespace cbmrag::service {

inline constexpr std::size_t kDefaultHeatmapSide = 256;

struct ServiceOptions {
  retrieval::ChunkingParams chunking;
  agents::PipelineOptions pipeline;
  agents::ChatOptions chat;
};

// Transport-independent session operations. Every method returns the JSON
// body the REST layer sends back. Calls on distinct sessions run
// concurrently; mutations of one session are serialized.
class Service {
 public:
  Service(providers::ProviderSet providers, retrieval::StoreCatalog catalog, ConceptModel model,
          agents::PromptLibrary prompts, ServiceOptions options,
          std::shared_ptr<SessionRepository> sessions);

  // Builds providers, stores, concept model and prompts from a config and
  // reloads persisted sessions.
  static std::unique_ptr<Service> from_config(const Config& config);

  nlohmann::json create_session();
  // Errors: unknown_session.
  nlohmann::json get_session(const std::string& id) const;

  // Errors: unknown_session, unsupported_media_type, provider errors.
  nlohmann::json analyze_image(const std::string& id, std::span<const std::uint8_t> image,
                               const std::string& media_type);

  // PNG bytes. Errors: unknown_session, no_analysis, unknown_concept,
  // invalid_argument (size).
  std::string heatmap_png(const std::string& id, const std::string& concept_id,
                          std::size_t width = kDefaultHeatmapSide,
                          std::size_t height = kDefaultHeatmapSide) const;

  // Overrides accumulate across calls. All entries are checked before any
  // is applied. Errors: unknown_session, no_analysis, unknown_concept,
  // score_out_of_range.
  nlohmann::json update_concepts(const std::string& id,
                                 const std::map<std::string, double>& overrides);

  // Errors: unknown_session, unsupported_media_type, duplicate_document,
  // invalid_encoding, provider errors.
  nlohmann::json ingest_upload(const std::string& id, std::span<const std::uint8_t> bytes,
                               const std::string& media_type, const std::string& doc_id);

  // Errors: unknown_session, no_analysis, malformed_report, provider errors.
  nlohmann::json generate_report(const std::string& id);

  // Errors: unknown_session, invalid_argument (blank message), provider errors.
  nlohmann::json chat_message(const std::string& id, const std::string& message);
  // The prompt sent to the model for the last chat turn.
  nlohmann::json last_chat_prompt(const std::string& id) const;

  const ConceptModel& model() const noexcept { return model_; }
  const retrieval::StoreCatalog& catalog() const noexcept { return catalog_; }
  SessionRepository& sessions() noexcept { return *sessions_; }

 private:
  nlohmann::json session_view(const Session& s) const;
  nlohmann::json analysis_view(const Session& s) const;
  std::string case_state_text(const Session& s) const;
  void touch_and_save(Session& s) const;

  providers::ProviderSet providers_;
  retrieval::StoreCatalog catalog_;
  ConceptModel model_;
  agents::PromptLibrary prompts_;
  ServiceOptions options_;
  std::shared_ptr<SessionRepository> sessions_;
};

// "/v1/sessions/<id>/heatmaps/<concept_id>"
std::string heatmap_url(const std::string& session_id, const std::string& concept_id);

}  // namespace cbmrag::service
