#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbmrag/cbm/bottleneck.hpp"
#include "cbmrag/cbm/classifier.hpp"
#include "cbmrag/cbm/concepts.hpp"
#include "cbmrag/providers/provider.hpp"

namespace cbmrag::service {

// Loaded concept set, its embeddings and the classifier over it.
struct ConceptModel {
  cbm::ConceptSet concepts;
  cbm::ConceptEmbeddings embeddings;
  cbm::LinearClassifier classifier;

  // Embeds the concept set (through the projection when present) and checks
  // that the classifier belongs to it.
  // Errors: concept_set_mismatch, provider errors.
  static ConceptModel build(cbm::ConceptSet concepts, cbm::LinearClassifier classifier,
                            providers::TextEmbedder& embedder,
                            const std::optional<providers::Projection>& projection = {});
};

// Image embeddings -> similarity matrix -> concept vector.
struct ImageConcepts {
  cbm::SimilarityMatrix similarity;
  cbm::ConceptVector concept_vector;
};

ImageConcepts extract_concepts(std::span<const std::uint8_t> image, std::string_view media_type,
                               providers::ImageEmbedder& embedder,
                               const cbm::ConceptEmbeddings& embeddings);

struct ConceptRow {
  std::size_t index = 0;
  std::string concept_id;
  std::string name;
  double score = 0.0;      // normalized activation in use
  double raw_score = 0.0;  // pooled cosine
  double contribution = 0.0;
  bool overridden = false;
};

// Rows ordered by |contribution| descending, ties by concept index.
std::vector<ConceptRow> concept_rows(const cbm::ConceptSet& concepts, const cbm::ConceptVector& c,
                                     const cbm::ContributionScores& contributions,
                                     const std::vector<bool>& overridden = {});

void to_json(nlohmann::json& j, const ConceptRow& r);

// Predicted-class snapshot used by the API responses and the CLI output.
nlohmann::json prediction_json(const cbm::Prediction& p, const cbm::LinearClassifier& model);

}  // namespace cbmrag::service
