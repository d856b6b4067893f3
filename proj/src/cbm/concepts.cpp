#include "cbmrag/cbm/concepts.hpp"

#include <unordered_set>

#include "cbmrag/error.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::cbm {

std::optional<std::size_t> ConceptSet::index_of(const std::string& concept_id) const {
  for (std::size_t j = 0; j < concepts.size(); ++j) {
    if (concepts[j].concept_id == concept_id) return j;
  }
  return std::nullopt;
}

void validate(const ConceptSet& set) {
  if (set.concepts.empty()) throw Error(Errc::invalid_argument, "concept set is empty");
  std::unordered_set<std::string> seen;
  for (const auto& c : set.concepts) {
    if (c.concept_id.empty()) throw Error(Errc::invalid_argument, "concept with empty id");
    if (!seen.insert(c.concept_id).second) {
      throw Error(Errc::invalid_argument, "duplicate concept id '" + c.concept_id + "'");
    }
    if (util::trim(c.prompt_text).empty()) {
      throw Error(Errc::invalid_argument, "concept '" + c.concept_id + "' has an empty prompt");
    }
  }
}

ConceptEmbeddings embed_concepts(const ConceptSet& set, providers::TextEmbedder& embedder,
                                 const std::optional<providers::Projection>& projection) {
  validate(set);
  std::vector<std::string> prompts;
  prompts.reserve(set.size());
  for (const auto& c : set.concepts) prompts.push_back(c.prompt_text);
  auto vectors = embedder.embed_text(prompts);
  if (projection) {
    for (auto& v : vectors) v = projection->apply(v);
  }
  const auto d = vectors.front().dim();
  ConceptEmbeddings out{set.id, Matrix(set.size(), d)};
  for (std::size_t j = 0; j < vectors.size(); ++j) {
    auto row = out.matrix.row(j);
    std::copy(vectors[j].values.begin(), vectors[j].values.end(), row.begin());
  }
  return out;
}

}  // namespace cbmrag::cbm
