#include "cbmrag/cbm/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "cbmrag/error.hpp"

namespace cbmrag::cbm {

std::size_t LinearClassifier::class_index(const std::string& label) const {
  auto it = std::find(class_labels.begin(), class_labels.end(), label);
  if (it == class_labels.end()) {
    throw Error(Errc::unknown_class_label, "unknown class label '" + label + "'");
  }
  return static_cast<std::size_t>(it - class_labels.begin());
}

void validate(const LinearClassifier& model) {
  if (model.class_labels.size() < 2) {
    throw Error(Errc::invalid_argument, "classifier needs at least two class labels");
  }
  std::unordered_set<std::string> seen(model.class_labels.begin(), model.class_labels.end());
  if (seen.size() != model.class_labels.size()) {
    throw Error(Errc::invalid_argument, "classifier labels are not unique");
  }
  if (model.weights.rows() != model.class_labels.size() ||
      model.bias.size() != model.class_labels.size() || model.weights.cols() == 0) {
    throw Error(Errc::invalid_argument, "classifier weight/bias shapes do not match labels");
  }
  for (double w : model.weights.data()) {
    if (!std::isfinite(w)) throw Error(Errc::invalid_argument, "non-finite classifier weight");
  }
  for (double b : model.bias) {
    if (!std::isfinite(b)) throw Error(Errc::invalid_argument, "non-finite classifier bias");
  }
}

LinearClassifier zero_classifier(std::string concept_set_id, std::vector<std::string> labels,
                                 std::size_t concepts) {
  LinearClassifier m;
  m.concept_set_id = std::move(concept_set_id);
  m.weights = Matrix(labels.size(), concepts);
  m.bias.assign(labels.size(), 0.0);
  m.class_labels = std::move(labels);
  return m;
}

double ContributionScores::total() const {
  double sum = 0.0;
  for (double x : per_concept) sum += x;
  return sum + bias;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - top);
    sum += p[k];
  }
  for (auto& x : p) x /= sum;
  return p;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

namespace {

void check_compatible(const LinearClassifier& model, const ConceptVector& c) {
  if (model.concept_set_id != c.concept_set_id) {
    throw Error(Errc::concept_set_mismatch, "classifier trained on concept set '" +
                                                model.concept_set_id + "', got '" +
                                                c.concept_set_id + "'");
  }
  if (model.concepts() != c.normalized.size()) {
    throw Error(Errc::concept_set_mismatch,
                "classifier expects " + std::to_string(model.concepts()) + " concepts, got " +
                    std::to_string(c.normalized.size()));
  }
}

// Same summation order as ContributionScores::total so the decomposition is exact.
double class_logit(const LinearClassifier& model, std::size_t k,
                   std::span<const double> normalized) {
  double sum = 0.0;
  const auto w = model.weights.row(k);
  for (std::size_t j = 0; j < normalized.size(); ++j) sum += w[j] * normalized[j];
  return sum + model.bias[k];
}

}  // namespace

std::vector<double> logits(const LinearClassifier& model, const ConceptVector& c) {
  check_compatible(model, c);
  std::vector<double> z(model.classes());
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = class_logit(model, k, c.normalized);
  return z;
}

Prediction classify(const LinearClassifier& model, const ConceptVector& c) {
  Prediction p;
  p.logits = logits(model, c);
  p.probabilities = softmax(p.logits);
  p.predicted_index = argmax(p.probabilities);
  p.predicted_label = model.class_labels[p.predicted_index];
  return p;
}

ContributionScores contributions(const LinearClassifier& model, const ConceptVector& c,
                                 const std::string& class_label) {
  check_compatible(model, c);
  const auto k = model.class_index(class_label);
  ContributionScores out{class_label, std::vector<double>(c.normalized.size()), model.bias[k]};
  const auto w = model.weights.row(k);
  for (std::size_t j = 0; j < out.per_concept.size(); ++j) {
    out.per_concept[j] = w[j] * c.normalized[j];
  }
  return out;
}

Matrix contribution_matrix(const LinearClassifier& model, const ConceptVector& c) {
  check_compatible(model, c);
  Matrix out(model.classes(), model.concepts());
  for (std::size_t k = 0; k < model.classes(); ++k) {
    for (std::size_t j = 0; j < model.concepts(); ++j) {
      out(k, j) = model.weights(k, j) * c.normalized[j];
    }
  }
  return out;
}

LossGradient loss_and_gradient(const LinearClassifier& model,
                               std::span<const LabeledSample> samples, double l2_weight) {
  if (samples.empty()) throw Error(Errc::empty_dataset, "no samples");
  const auto num_classes = model.classes();
  const auto num_concepts = model.concepts();
  LossGradient out{0.0, Matrix(num_classes, num_concepts), std::vector<double>(num_classes)};
  const double inv_n = 1.0 / static_cast<double>(samples.size());

  for (const auto& s : samples) {
    const auto y = model.class_index(s.label);
    const auto z = logits(model, s.concepts);
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double zk : z) sum += std::exp(zk - top);
    const double log_sum = top + std::log(sum);
    out.loss += (log_sum - z[y]) * inv_n;
    for (std::size_t k = 0; k < num_classes; ++k) {
      const double residual = std::exp(z[k] - log_sum) - (k == y ? 1.0 : 0.0);
      out.grad_bias[k] += residual * inv_n;
      auto g = out.grad_weights.row(k);
      for (std::size_t j = 0; j < num_concepts; ++j) {
        g[j] += residual * s.concepts.normalized[j] * inv_n;
      }
    }
  }

  double sq = 0.0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t j = 0; j < num_concepts; ++j) {
      const double w = model.weights(k, j);
      sq += w * w;
      out.grad_weights(k, j) += l2_weight * w;
    }
  }
  out.loss += 0.5 * l2_weight * sq;
  return out;
}

LinearClassifier train(std::span<const LabeledSample> samples,
                       const std::vector<std::string>& class_labels,
                       const TrainingOptions& options,
                       const std::function<void(int, double)>& on_epoch) {
  if (class_labels.size() < 2) {
    throw Error(Errc::invalid_argument, "training needs at least two class labels");
  }
  if (samples.empty()) throw Error(Errc::empty_class, "no training samples");

  const auto& set_id = samples.front().concepts.concept_set_id;
  const auto num_concepts = samples.front().concepts.normalized.size();
  std::vector<std::size_t> per_class(class_labels.size(), 0);
  auto model = zero_classifier(set_id, class_labels, num_concepts);
  validate(model);
  for (const auto& s : samples) {
    if (s.concepts.concept_set_id != set_id || s.concepts.normalized.size() != num_concepts) {
      throw Error(Errc::inconsistent_concept_set, "training samples use different concept sets");
    }
    ++per_class[model.class_index(s.label)];
  }
  for (std::size_t k = 0; k < per_class.size(); ++k) {
    if (per_class[k] == 0) {
      throw Error(Errc::empty_class, "no training samples for class '" + class_labels[k] + "'");
    }
  }

  std::vector<LabeledSample> ordered(samples.begin(), samples.end());
  if (options.shuffle) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(ordered.begin(), ordered.end(), rng);
  }

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    auto lg = loss_and_gradient(model, ordered, options.l2_weight);
    if (on_epoch) on_epoch(epoch, lg.loss);
    for (std::size_t k = 0; k < model.classes(); ++k) {
      auto w = model.weights.row(k);
      const auto g = lg.grad_weights.row(k);
      for (std::size_t j = 0; j < num_concepts; ++j) w[j] -= options.learning_rate * g[j];
      model.bias[k] -= options.learning_rate * lg.grad_bias[k];
    }
  }
  return model;
}

Metrics evaluate(const LinearClassifier& model, std::span<const LabeledSample> samples) {
  if (samples.empty()) throw Error(Errc::empty_dataset, "cannot evaluate on an empty dataset");
  const auto num_classes = model.classes();
  Metrics m;
  m.class_labels = model.class_labels;
  m.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (const auto& s : samples) {
    const auto truth = model.class_index(s.label);
    const auto predicted = classify(model, s.concepts).predicted_index;
    ++m.confusion[truth][predicted];
    if (truth == predicted) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  m.precision.assign(num_classes, 0.0);
  m.recall.assign(num_classes, 0.0);
  for (std::size_t k = 0; k < num_classes; ++k) {
    std::size_t predicted_k = 0;
    for (std::size_t t = 0; t < num_classes; ++t) predicted_k += m.confusion[t][k];
    const auto truth_k = std::accumulate(m.confusion[k].begin(), m.confusion[k].end(),
                                         std::size_t{0});
    if (predicted_k > 0) {
      m.precision[k] = static_cast<double>(m.confusion[k][k]) / static_cast<double>(predicted_k);
    }
    if (truth_k > 0) {
      m.recall[k] = static_cast<double>(m.confusion[k][k]) / static_cast<double>(truth_k);
    }
  }
  return m;
}

}  // namespace cbmrag::cbm
