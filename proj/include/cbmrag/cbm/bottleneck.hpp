#pragma once

#include <span>
#include <string>
#include <vector>

#include "cbmrag/cbm/concepts.hpp"
#include "cbmrag/cbm/matrix.hpp"
#include "cbmrag/providers/types.hpp"

namespace cbmrag::cbm {

// values(i, j): cosine between image token i and concept j, in [-1, 1].
struct SimilarityMatrix {
  Matrix values;  // T x K
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;

  std::size_t tokens() const noexcept { return values.rows(); }
  std::size_t concepts() const noexcept { return values.cols(); }

  bool operator==(const SimilarityMatrix&) const = default;
};

struct ConceptVector {
  std::string concept_set_id;
  std::vector<double> raw;         // max-pooled cosine, [-1, 1]
  std::vector<double> normalized;  // (raw + 1) / 2, [0, 1]

  std::size_t size() const noexcept { return normalized.size(); }
  bool operator==(const ConceptVector&) const = default;
};

struct SaliencyMap {
  std::string concept_id;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::vector<double> grid;  // row-major, [0, 1]

  double at(std::size_t y, std::size_t x) const { return grid[y * grid_w + x]; }
};

// Errors: dimension_mismatch when token and concept dimensions differ.
// A zero-norm vector on either side yields similarity 0.
SimilarityMatrix similarity_matrix(const providers::ImageTokenEmbeddings& image,
                                   const ConceptEmbeddings& concepts);

// raw[j] = max_i S(i, j)
std::vector<double> pool_concepts(const SimilarityMatrix& s);

// (raw + 1) / 2. Errors: out_of_range for values outside [-1, 1] beyond 1e-9;
// values inside the slack are clamped.
std::vector<double> normalize_concepts(std::span<const double> raw);

ConceptVector make_concept_vector(const SimilarityMatrix& s, std::string concept_set_id);

// Column j reshaped to the token grid and min-max scaled; a constant column
// gives an all-zero map. Errors: index_out_of_range.
SaliencyMap saliency(const SimilarityMatrix& s, std::size_t concept_index,
                     std::string concept_id = {});

// Order of concept indices by |value| descending, ties by index ascending.
std::vector<std::size_t> rank_by_magnitude(std::span<const double> values);

}  // namespace cbmrag::cbm
