#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cbmrag/cbm/bottleneck.hpp"
#include "cbmrag/cbm/matrix.hpp"

namespace cbmrag::cbm {

inline const std::vector<std::string>& default_class_labels() {
  static const std::vector<std::string> labels{"Pneumonia", "COVID-19", "Normal"};
  return labels;
}

struct LinearClassifier {
  std::string concept_set_id;
  std::vector<std::string> class_labels;
  Matrix weights;             // C x K
  std::vector<double> bias;   // C

  std::size_t classes() const noexcept { return class_labels.size(); }
  std::size_t concepts() const noexcept { return weights.cols(); }
  // Errors: unknown_class_label.
  std::size_t class_index(const std::string& label) const;

  bool operator==(const LinearClassifier&) const = default;
};

// Throws Error(invalid_argument) on shape errors, fewer than two labels or
// duplicate labels.
void validate(const LinearClassifier& model);

LinearClassifier zero_classifier(std::string concept_set_id, std::vector<std::string> labels,
                                 std::size_t concepts);

struct Prediction {
  std::vector<double> logits;
  std::vector<double> probabilities;
  std::size_t predicted_index = 0;
  std::string predicted_label;

  bool operator==(const Prediction&) const = default;
};

struct ContributionScores {
  std::string class_label;
  std::vector<double> per_concept;
  double bias = 0.0;

  double total() const;
};

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);
// Lowest index wins ties.
std::size_t argmax(std::span<const double> values);

// z = W * normalized + b. Errors: concept_set_mismatch.
std::vector<double> logits(const LinearClassifier& model, const ConceptVector& c);
Prediction classify(const LinearClassifier& model, const ConceptVector& c);

// per_concept[j] = W[k][j] * normalized[j], bias = b[k].
// Errors: unknown_class_label, concept_set_mismatch.
ContributionScores contributions(const LinearClassifier& model, const ConceptVector& c,
                                 const std::string& class_label);
// Full C x K contribution matrix.
Matrix contribution_matrix(const LinearClassifier& model, const ConceptVector& c);

struct LabeledSample {
  ConceptVector concepts;
  std::string label;
};

struct TrainingOptions {
  double learning_rate = 0.1;
  int epochs = 500;
  std::uint64_t seed = 0;
  double l2_weight = 1e-4;
  bool shuffle = false;  // permute sample order with `seed` before training
};

struct LossGradient {
  double loss = 0.0;
  Matrix grad_weights;
  std::vector<double> grad_bias;
};

// Mean softmax cross-entropy plus (l2_weight / 2) * ||W||^2 (bias unpenalised).
LossGradient loss_and_gradient(const LinearClassifier& model,
                               std::span<const LabeledSample> samples, double l2_weight);

// Full-batch gradient descent from zero initialisation. `on_epoch` receives
// the loss evaluated before each update.
// Errors: empty_class, inconsistent_concept_set, unknown_class_label.
LinearClassifier train(std::span<const LabeledSample> samples,
                       const std::vector<std::string>& class_labels,
                       const TrainingOptions& options = {},
                       const std::function<void(int, double)>& on_epoch = {});

struct Metrics {
  std::vector<std::string> class_labels;
  double accuracy = 0.0;
  std::vector<double> precision;  // 0 when a class is never predicted
  std::vector<double> recall;     // 0 when a class never occurs
  std::vector<std::vector<std::size_t>> confusion;  // rows = truth, cols = predicted
};

// Errors: empty_dataset, unknown_class_label.
Metrics evaluate(const LinearClassifier& model, std::span<const LabeledSample> samples);

}  // namespace cbmrag::cbm
