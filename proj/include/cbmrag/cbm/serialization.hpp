#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "cbmrag/cbm/bottleneck.hpp"
#include "cbmrag/cbm/classifier.hpp"
#include "cbmrag/cbm/concepts.hpp"

namespace cbmrag::cbm {

inline constexpr int kClassifierFormatVersion = 1;

void to_json(nlohmann::json& j, const Concept& c);
void from_json(const nlohmann::json& j, Concept& c);
void to_json(nlohmann::json& j, const ConceptSet& s);
void from_json(const nlohmann::json& j, ConceptSet& s);
void to_json(nlohmann::json& j, const Matrix& m);
void from_json(const nlohmann::json& j, Matrix& m);
// {"concept_set_id","class_labels","W","b","format_version"}
void to_json(nlohmann::json& j, const LinearClassifier& m);
void from_json(const nlohmann::json& j, LinearClassifier& m);
void to_json(nlohmann::json& j, const ConceptEmbeddings& e);
void from_json(const nlohmann::json& j, ConceptEmbeddings& e);
void to_json(nlohmann::json& j, const SimilarityMatrix& s);
void from_json(const nlohmann::json& j, SimilarityMatrix& s);
void to_json(nlohmann::json& j, const ConceptVector& c);
void from_json(const nlohmann::json& j, ConceptVector& c);
void to_json(nlohmann::json& j, const Prediction& p);
void from_json(const nlohmann::json& j, Prediction& p);

// File helpers. Errors: io_failure when unreadable, invalid_config when the
// content does not match the schema.
ConceptSet load_concept_set(const std::filesystem::path& path);
void save_concept_set(const ConceptSet& set, const std::filesystem::path& path);
LinearClassifier load_classifier(const std::filesystem::path& path);
void save_classifier(const LinearClassifier& model, const std::filesystem::path& path);
ConceptEmbeddings load_concept_embeddings(const std::filesystem::path& path);
void save_concept_embeddings(const ConceptEmbeddings& e, const std::filesystem::path& path);

}  // namespace cbmrag::cbm
