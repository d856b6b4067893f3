#include "cbmrag/service/analysis.hpp"

#include "cbmrag/error.hpp"

namespace cbmrag::service {

ConceptModel ConceptModel::build(cbm::ConceptSet concepts, cbm::LinearClassifier classifier,
                                 providers::TextEmbedder& embedder,
                                 const std::optional<providers::Projection>& projection) {
  cbm::validate(concepts);
  cbm::validate(classifier);
  if (classifier.concept_set_id != concepts.id || classifier.concepts() != concepts.size()) {
    throw Error(Errc::concept_set_mismatch,
                "classifier was trained on concept set '" + classifier.concept_set_id + "' (" +
                    std::to_string(classifier.concepts()) + " concepts), loaded set is '" +
                    concepts.id + "' (" + std::to_string(concepts.size()) + ")");
  }
  auto embeddings = cbm::embed_concepts(concepts, embedder, projection);
  return {std::move(concepts), std::move(embeddings), std::move(classifier)};
}

ImageConcepts extract_concepts(std::span<const std::uint8_t> image, std::string_view media_type,
                               providers::ImageEmbedder& embedder,
                               const cbm::ConceptEmbeddings& embeddings) {
  const auto tokens = embedder.embed_image(image, media_type);
  auto s = cbm::similarity_matrix(tokens, embeddings);
  auto c = cbm::make_concept_vector(s, embeddings.concept_set_id);
  return {std::move(s), std::move(c)};
}

std::vector<ConceptRow> concept_rows(const cbm::ConceptSet& concepts, const cbm::ConceptVector& c,
                                     const cbm::ContributionScores& contributions,
                                     const std::vector<bool>& overridden) {
  std::vector<ConceptRow> rows;
  for (auto j : cbm::rank_by_magnitude(contributions.per_concept)) {
    const auto& concept_def = concepts.concepts.at(j);
    rows.push_back({j, concept_def.concept_id, concept_def.name, c.normalized.at(j),
                    c.raw.empty() ? 0.0 : c.raw.at(j), contributions.per_concept[j],
                    j < overridden.size() && overridden[j]});
  }
  return rows;
}

void to_json(nlohmann::json& j, const ConceptRow& r) {
  j = nlohmann::json{{"index", r.index},
                     {"concept_id", r.concept_id},
                     {"name", r.name},
                     {"score", r.score},
                     {"raw_score", r.raw_score},
                     {"contribution", r.contribution},
                     {"overridden", r.overridden}};
}

nlohmann::json prediction_json(const cbm::Prediction& p, const cbm::LinearClassifier& model) {
  nlohmann::json probs = nlohmann::json::object();
  for (std::size_t k = 0; k < model.classes(); ++k) probs[model.class_labels[k]] = p.probabilities[k];
  return {{"label", p.predicted_label},
          {"index", p.predicted_index},
          {"probability", p.probabilities.at(p.predicted_index)},
          {"probabilities", std::move(probs)},
          {"logits", p.logits}};
}

}  // namespace cbmrag::service
