#pragma once

#include <string>
#include <vector>

#include "cbmrag/cbm/bottleneck.hpp"
#include "cbmrag/cbm/classifier.hpp"
#include "cbmrag/cbm/concepts.hpp"
#include "support/oracles.hpp"

namespace build {

inline cbmrag::cbm::Matrix matrix(const oracle::Mat& m) {
  cbmrag::cbm::Matrix out(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < m[r].size(); ++c) out(r, c) = m[r][c];
  return out;
}

inline cbmrag::providers::ImageTokenEmbeddings image(const oracle::Mat& tokens, std::size_t gh,
                                                     std::size_t gw) {
  cbmrag::providers::ImageTokenEmbeddings out{gh, gw, {}};
  for (const auto& t : tokens) out.tokens.push_back({t});
  return out;
}

inline cbmrag::cbm::ConceptEmbeddings embeddings(const oracle::Mat& rows,
                                                 const std::string& set_id = "set") {
  return {set_id, matrix(rows)};
}

inline cbmrag::cbm::SimilarityMatrix similarity(const oracle::Mat& s, std::size_t gh,
                                                std::size_t gw) {
  return {matrix(s), gh, gw};
}

inline cbmrag::cbm::LinearClassifier classifier(const oracle::Mat& w, const oracle::Vec& b,
                                                const std::string& set_id = "set") {
  std::vector<std::string> labels;
  if (w.size() == 3) {
    labels = cbmrag::cbm::default_class_labels();
  } else {
    for (std::size_t k = 0; k < w.size(); ++k) labels.push_back("class" + std::to_string(k));
  }
  return {set_id, labels, matrix(w), b};
}

// Concept vector whose normalized part is `normalized`.
inline cbmrag::cbm::ConceptVector concepts(const oracle::Vec& normalized,
                                           const std::string& set_id = "set") {
  cbmrag::cbm::ConceptVector c{set_id, {}, normalized};
  for (double x : normalized) c.raw.push_back(2 * x - 1);
  return c;
}

}  // namespace build
