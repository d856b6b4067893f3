#include "cbmrag/service/service.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "cbmrag/cbm/serialization.hpp"
#include "cbmrag/error.hpp"
#include "cbmrag/service/heatmap.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::service {

namespace {

std::string now_string() { return agents::format_timestamp(std::chrono::system_clock::now()); }

// "Text/Plain; charset=utf-8" -> "text/plain"
std::string base_media_type(const std::string& media_type) {
  auto base = util::trim(media_type.substr(0, media_type.find(';')));
  std::transform(base.begin(), base.end(), base.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return base;
}

std::size_t concept_index(const ConceptModel& model, const std::string& concept_id) {
  const auto& items = model.concepts.concepts;
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (items[j].concept_id == concept_id) return j;
  }
  throw Error(Errc::unknown_concept, "no concept '" + concept_id + "'");
}

void require_analysis(const Session& s) {
  if (!s.concept_state || !s.prediction || !s.similarity) {
    throw Error(Errc::no_analysis, "session " + s.id + " has no analyzed image");
  }
}

}  // namespace

std::string heatmap_url(const std::string& session_id, const std::string& concept_id) {
  return "/v1/sessions/" + session_id + "/heatmaps/" + concept_id;
}

Service::Service(providers::ProviderSet providers, retrieval::StoreCatalog catalog,
                 ConceptModel model, agents::PromptLibrary prompts, ServiceOptions options,
                 std::shared_ptr<SessionRepository> sessions)
    : providers_(std::move(providers)),
      catalog_(std::move(catalog)),
      model_(std::move(model)),
      prompts_(std::move(prompts)),
      options_(options),
      sessions_(std::move(sessions)) {
  if (!providers_.text || !providers_.image || !providers_.transcriber || !providers_.chat) {
    throw Error(Errc::invalid_config, "service needs text, image, transcription and chat providers");
  }
  if (!sessions_) throw Error(Errc::invalid_config, "service needs a session repository");
}

std::unique_ptr<Service> Service::from_config(const Config& config) {
  auto providers = make_providers(config.providers);
  auto catalog =
      retrieval::StoreCatalog::open_directory(config.store_dir, providers.text->dimension());
  auto model = ConceptModel::build(cbm::load_concept_set(config.concepts),
                                   cbm::load_classifier(config.model), *providers.text,
                                   providers.projection);
  auto prompts = std::filesystem::is_directory(config.prompts_dir)
                     ? agents::PromptLibrary::from_directory(config.prompts_dir)
                     : agents::PromptLibrary{};
  auto sessions = std::make_shared<SessionRepository>(config.session_dir);
  sessions->load_all();
  return std::make_unique<Service>(std::move(providers), std::move(catalog), std::move(model),
                                   std::move(prompts),
                                   ServiceOptions{config.chunking, config.pipeline, config.chat},
                                   std::move(sessions));
}

void Service::touch_and_save(Session& s) const {
  s.updated_at = now_string();
  sessions_->save(s);
}

nlohmann::json Service::analysis_view(const Session& s) const {
  if (!s.concept_state || !s.prediction) return nullptr;
  const auto& state = *s.concept_state;
  const auto& prediction = *s.prediction;
  const auto contrib =
      cbm::contributions(model_.classifier, state.vector, prediction.predicted_label);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : concept_rows(model_.concepts, state.vector, contrib, state.overridden)) {
    nlohmann::json r = row;
    r["original_score"] = state.original.at(row.index);
    r["heatmap_url"] = heatmap_url(s.id, row.concept_id);
    rows.push_back(std::move(r));
  }
  nlohmann::json grid = nullptr;
  if (s.similarity) grid = {{"h", s.similarity->grid_h}, {"w", s.similarity->grid_w}};
  return {{"session_id", s.id},
          {"concept_set_id", model_.concepts.id},
          {"prediction", prediction_json(prediction, model_.classifier)},
          {"bias", contrib.bias},
          {"concepts", std::move(rows)},
          {"grid", std::move(grid)}};
}

nlohmann::json Service::session_view(const Session& s) const {
  nlohmann::json image = nullptr;
  if (s.image) image = {{"media_type", s.image->media_type}};
  return {{"id", s.id},
          {"created_at", s.created_at},
          {"updated_at", s.updated_at},
          {"image", std::move(image)},
          {"analysis", analysis_view(s)},
          {"report", s.report ? nlohmann::json(*s.report) : nlohmann::json(nullptr)},
          {"chat_history", s.chat_history}};
}

nlohmann::json Service::create_session() {
  auto slot = sessions_->create();
  std::shared_lock lock(slot->mutex);
  auto view = session_view(slot->session);
  view["uploads"] = {{"chunks", slot->uploads->size()}};
  return view;
}

nlohmann::json Service::get_session(const std::string& id) const {
  auto slot = sessions_->get(id);
  std::shared_lock lock(slot->mutex);
  auto view = session_view(slot->session);
  view["uploads"] = {{"chunks", slot->uploads->size()}};
  return view;
}

nlohmann::json Service::analyze_image(const std::string& id, std::span<const std::uint8_t> image,
                                      const std::string& media_type) {
  auto slot = sessions_->get(id);
  const auto type = base_media_type(media_type);
  auto extracted = extract_concepts(image, type, *providers_.image, model_.embeddings);
  auto prediction = cbm::classify(model_.classifier, extracted.concept_vector);

  std::unique_lock lock(slot->mutex);
  auto& s = slot->session;
  sessions_->save_image(s.id, image);
  s.image = ImageRef{s.id + ".image", type};
  ConceptState state;
  state.original = extracted.concept_vector.normalized;
  state.overridden.assign(state.original.size(), false);
  state.vector = std::move(extracted.concept_vector);
  s.concept_state = std::move(state);
  s.similarity = std::move(extracted.similarity);
  s.prediction = std::move(prediction);
  s.report.reset();
  touch_and_save(s);
  return analysis_view(s);
}

std::string Service::heatmap_png(const std::string& id, const std::string& concept_id,
                                 std::size_t width, std::size_t height) const {
  auto slot = sessions_->get(id);
  std::shared_lock lock(slot->mutex);
  const auto& s = slot->session;
  require_analysis(s);
  const auto j = concept_index(model_, concept_id);
  const auto map = cbm::saliency(*s.similarity, j, concept_id);
  lock.unlock();
  return encode_png(render_heatmap(map, width, height));
}

nlohmann::json Service::update_concepts(const std::string& id,
                                        const std::map<std::string, double>& overrides) {
  auto slot = sessions_->get(id);
  std::unique_lock lock(slot->mutex);
  auto& s = slot->session;
  require_analysis(s);

  std::vector<std::pair<std::size_t, double>> resolved;
  for (const auto& [concept_id, score] : overrides) {
    const auto j = concept_index(model_, concept_id);
    if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
      std::ostringstream msg;
      msg << "score " << score << " for concept '" << concept_id << "' is outside [0, 1]";
      throw Error(Errc::score_out_of_range, msg.str());
    }
    resolved.emplace_back(j, score);
  }

  if (!resolved.empty()) {
    auto& state = *s.concept_state;
    for (const auto& [j, score] : resolved) {
      state.vector.normalized[j] = score;
      state.overridden[j] = true;
    }
    s.prediction = cbm::classify(model_.classifier, state.vector);
    touch_and_save(s);
  }
  return analysis_view(s);
}

nlohmann::json Service::ingest_upload(const std::string& id, std::span<const std::uint8_t> bytes,
                                      const std::string& media_type, const std::string& doc_id) {
  auto slot = sessions_->get(id);
  const auto type = base_media_type(media_type);
  const bool is_text = type == "text/plain" || type == "text/markdown";
  if (!is_text && !providers::is_transcribable_media_type(type)) {
    throw Error(Errc::unsupported_media_type,
                "uploads accept text/plain, text/markdown, audio/mpeg or video/mp4, got '" +
                    type + "'");
  }
  if (util::trim(doc_id).empty()) throw Error(Errc::invalid_argument, "doc_id must not be blank");

  std::unique_lock lock(slot->mutex);
  std::size_t chunks = 0;
  if (is_text) {
    const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    chunks = slot->uploads->ingest_document(doc_id, text, *providers_.text, options_.chunking);
  } else {
    chunks = slot->uploads->ingest_media(doc_id, bytes, type, *providers_.transcriber,
                                         *providers_.text, options_.chunking);
  }
  touch_and_save(slot->session);
  return {{"session_id", id},
          {"doc_id", doc_id},
          {"media_type", type},
          {"chunks", chunks},
          {"store", retrieval::kUserUploadsStore},
          {"total_chunks", slot->uploads->size()}};
}

nlohmann::json Service::generate_report(const std::string& id) {
  auto slot = sessions_->get(id);
  std::unique_lock lock(slot->mutex);
  auto& s = slot->session;
  require_analysis(s);
  const auto& state = *s.concept_state;
  const auto& prediction = *s.prediction;
  const auto contrib =
      cbm::contributions(model_.classifier, state.vector, prediction.predicted_label);
  const agents::CaseFindings findings{prediction, contrib, model_.concepts, state.vector,
                                      state.overridden};
  auto consult = agents::radiologist_consult(findings, catalog_, *providers_.text,
                                             *providers_.chat, prompts_, options_.pipeline);
  std::vector<retrieval::RetrievalHit> hits;
  if (options_.pipeline.upload_hits > 0) {
    hits = slot->uploads->query(consult.consolidated_findings, options_.pipeline.upload_hits,
                                *providers_.text);
  }
  s.report = agents::write_report(consult.consolidated_findings, prediction, hits,
                                  *providers_.chat, prompts_, options_.pipeline,
                                  std::move(consult.traces));
  touch_and_save(s);
  nlohmann::json out = *s.report;
  out["session_id"] = s.id;
  out["disease_store"] = consult.disease_store;
  return out;
}

std::string Service::case_state_text(const Session& s) const {
  if (!s.concept_state || !s.prediction) return "No image has been analyzed for this case yet.";
  const auto& state = *s.concept_state;
  const auto& prediction = *s.prediction;
  const auto contrib =
      cbm::contributions(model_.classifier, state.vector, prediction.predicted_label);
  const agents::CaseFindings findings{prediction, contrib, model_.concepts, state.vector,
                                      state.overridden};
  std::ostringstream out;
  out << "Predicted class: " << prediction.predicted_label << " (probability "
      << prediction.probabilities.at(prediction.predicted_index) << ")\n";
  out << "Top concepts:\n" << agents::summarize_concepts(findings, options_.pipeline.top_concepts);
  if (s.report) {
    out << "\nCurrent report:\nFINDINGS: " << s.report->findings
        << "\nDIAGNOSIS: " << s.report->diagnosis << "\nGUIDELINES: " << s.report->guidelines;
  }
  return out.str();
}

nlohmann::json Service::chat_message(const std::string& id, const std::string& message) {
  auto slot = sessions_->get(id);
  if (util::trim(message).empty()) throw Error(Errc::invalid_argument, "message must not be blank");
  std::unique_lock lock(slot->mutex);
  auto& s = slot->session;

  auto catalog = catalog_;
  catalog.add(slot->uploads);
  auto result = agents::chat(case_state_text(s), message, s.chat_history, catalog,
                             *providers_.text, *providers_.chat, prompts_, options_.chat);
  s.chat_history = std::move(result.history);
  slot->last_chat_prompt = std::move(result.prompt);
  touch_and_save(s);
  return {{"session_id", s.id},
          {"reply", result.reply},
          {"history_length", s.chat_history.size()},
          {"trace", result.trace}};
}

nlohmann::json Service::last_chat_prompt(const std::string& id) const {
  auto slot = sessions_->get(id);
  std::shared_lock lock(slot->mutex);
  return {{"session_id", id}, {"messages", slot->last_chat_prompt}};
}

}  // namespace cbmrag::service
