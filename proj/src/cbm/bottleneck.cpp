#include "cbmrag/cbm/bottleneck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cbmrag/error.hpp"

namespace cbmrag::cbm {

namespace {

double norm(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace

SimilarityMatrix similarity_matrix(const providers::ImageTokenEmbeddings& image,
                                   const ConceptEmbeddings& concepts) {
  if (image.tokens.size() != image.grid_h * image.grid_w || image.tokens.empty()) {
    throw Error(Errc::invalid_argument, "image token count does not match its grid");
  }
  const auto d = concepts.matrix.cols();
  const auto k = concepts.matrix.rows();
  if (k == 0) throw Error(Errc::invalid_argument, "no concept embeddings");

  std::vector<double> concept_norms(k);
  for (std::size_t j = 0; j < k; ++j) concept_norms[j] = norm(concepts.matrix.row(j));

  SimilarityMatrix s{Matrix(image.tokens.size(), k), image.grid_h, image.grid_w};
  for (std::size_t i = 0; i < image.tokens.size(); ++i) {
    const auto& u = image.tokens[i].values;
    if (u.size() != d) {
      throw Error(Errc::dimension_mismatch, "image token dimension " + std::to_string(u.size()) +
                                                " != concept dimension " + std::to_string(d));
    }
    const double u_norm = norm(u);
    for (std::size_t j = 0; j < k; ++j) {
      if (u_norm == 0.0 || concept_norms[j] == 0.0) {
        s.values(i, j) = 0.0;
        continue;
      }
      const auto v = concepts.matrix.row(j);
      const double dot = std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
      s.values(i, j) = std::clamp(dot / (u_norm * concept_norms[j]), -1.0, 1.0);
    }
  }
  return s;
}

std::vector<double> pool_concepts(const SimilarityMatrix& s) {
  std::vector<double> raw(s.concepts(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < s.tokens(); ++i) {
    const auto row = s.values.row(i);
    for (std::size_t j = 0; j < raw.size(); ++j) raw[j] = std::max(raw[j], row[j]);
  }
  return raw;
}

std::vector<double> normalize_concepts(std::span<const double> raw) {
  constexpr double kSlack = 1e-9;
  std::vector<double> out;
  out.reserve(raw.size());
  for (double r : raw) {
    if (!(r >= -1.0 - kSlack && r <= 1.0 + kSlack)) {
      throw Error(Errc::out_of_range, "concept activation " + std::to_string(r) +
                                          " outside [-1, 1]");
    }
    out.push_back((std::clamp(r, -1.0, 1.0) + 1.0) / 2.0);
  }
  return out;
}

ConceptVector make_concept_vector(const SimilarityMatrix& s, std::string concept_set_id) {
  ConceptVector c;
  c.concept_set_id = std::move(concept_set_id);
  c.raw = pool_concepts(s);
  c.normalized = normalize_concepts(c.raw);
  return c;
}

SaliencyMap saliency(const SimilarityMatrix& s, std::size_t concept_index,
                     std::string concept_id) {
  if (concept_index >= s.concepts()) {
    throw Error(Errc::index_out_of_range, "concept index " + std::to_string(concept_index) +
                                              " >= " + std::to_string(s.concepts()));
  }
  if (s.tokens() != s.grid_h * s.grid_w) {
    throw Error(Errc::invalid_argument, "similarity matrix rows do not match its grid");
  }
  SaliencyMap map{std::move(concept_id), s.grid_h, s.grid_w, std::vector<double>(s.tokens())};
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < s.tokens(); ++i) {
    lo = std::min(lo, s.values(i, concept_index));
    hi = std::max(hi, s.values(i, concept_index));
  }
  if (hi > lo) {
    const double range = hi - lo;
    for (std::size_t i = 0; i < s.tokens(); ++i) {
      map.grid[i] = (s.values(i, concept_index) - lo) / range;
    }
  }
  return map;
}

std::vector<std::size_t> rank_by_magnitude(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(values[a]) > std::fabs(values[b]);
  });
  return order;
}

}  // namespace cbmrag::cbm
