#pragma once

#include <string>
#include <vector>

#include "cbmrag/agents/prompts.hpp"
#include "cbmrag/cbm/concepts.hpp"
#include "cbmrag/providers/provider.hpp"

namespace cbmrag::agents {

inline constexpr std::size_t kMinGeneratedConcepts = 5;

// Parses "id | name | prompt_text" lines. Lines that do not match are
// skipped; repeated ids keep their first occurrence.
std::vector<cbm::Concept> parse_concept_lines(const std::string& reply);

// Asks the completion model for concepts distinguishing `class_labels`. When
// fewer than kMinGeneratedConcepts valid lines come back, `fallback` (the
// curated set) is returned instead.
// Errors: invalid_argument (no labels), provider errors.
cbm::ConceptSet generate_concept_set(const std::vector<std::string>& class_labels,
                                     providers::ChatModel& model, const PromptLibrary& prompts,
                                     const cbm::ConceptSet& fallback);

}  // namespace cbmrag::agents
