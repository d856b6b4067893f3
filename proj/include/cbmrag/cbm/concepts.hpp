#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbmrag/cbm/matrix.hpp"
#include "cbmrag/providers/provider.hpp"

namespace cbmrag::cbm {

struct Concept {
  std::string concept_id;
  std::string name;
  std::string prompt_text;

  bool operator==(const Concept&) const = default;
};

struct ConceptSet {
  std::string id;
  std::vector<Concept> concepts;

  std::size_t size() const noexcept { return concepts.size(); }
  // Index of concept_id, or nullopt.
  std::optional<std::size_t> index_of(const std::string& concept_id) const;

  bool operator==(const ConceptSet&) const = default;
};

// Throws Error(invalid_argument) unless ids are unique, the list is non-empty
// and every prompt is non-blank.
void validate(const ConceptSet& set);

// Row j holds the (optionally projected) text embedding of concept j.
struct ConceptEmbeddings {
  std::string concept_set_id;
  Matrix matrix;  // K x d
};

// Embeds every concept's prompt text in one batch. When a projection is given
// the text vectors are mapped into image space first.
ConceptEmbeddings embed_concepts(const ConceptSet& set, providers::TextEmbedder& embedder,
                                 const std::optional<providers::Projection>& projection = {});

}  // namespace cbmrag::cbm
