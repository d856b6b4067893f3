#include "cbmrag/cbm/serialization.hpp"

#include "cbmrag/error.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::cbm {

using nlohmann::json;

void to_json(json& j, const Concept& c) {
  j = json{{"concept_id", c.concept_id}, {"name", c.name}, {"prompt_text", c.prompt_text}};
}

void from_json(const json& j, Concept& c) {
  j.at("concept_id").get_to(c.concept_id);
  j.at("name").get_to(c.name);
  j.at("prompt_text").get_to(c.prompt_text);
}

void to_json(json& j, const ConceptSet& s) {
  j = json{{"id", s.id}, {"concepts", s.concepts}};
}

void from_json(const json& j, ConceptSet& s) {
  j.at("id").get_to(s.id);
  j.at("concepts").get_to(s.concepts);
}

void to_json(json& j, const Matrix& m) {
  j = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    j.push_back(std::vector<double>(row.begin(), row.end()));
  }
}

void from_json(const json& j, Matrix& m) {
  if (!j.is_array()) throw json::type_error::create(302, "matrix must be an array of rows", &j);
  const auto rows = j.size();
  const auto cols = rows == 0 ? 0 : j.front().size();
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto values = j[r].get<std::vector<double>>();
    if (values.size() != cols) {
      throw json::other_error::create(501, "ragged matrix rows", &j);
    }
    std::copy(values.begin(), values.end(), out.row(r).begin());
  }
  m = std::move(out);
}

void to_json(json& j, const LinearClassifier& m) {
  j = json{{"concept_set_id", m.concept_set_id},
           {"class_labels", m.class_labels},
           {"W", m.weights},
           {"b", m.bias},
           {"format_version", kClassifierFormatVersion}};
}

void from_json(const json& j, LinearClassifier& m) {
  if (j.at("format_version").get<int>() != kClassifierFormatVersion) {
    throw json::other_error::create(501, "unsupported classifier format_version", &j);
  }
  j.at("concept_set_id").get_to(m.concept_set_id);
  j.at("class_labels").get_to(m.class_labels);
  j.at("W").get_to(m.weights);
  j.at("b").get_to(m.bias);
}

void to_json(json& j, const ConceptEmbeddings& e) {
  j = json{{"concept_set_id", e.concept_set_id}, {"dim", e.matrix.cols()}, {"matrix", e.matrix}};
}

void from_json(const json& j, ConceptEmbeddings& e) {
  j.at("concept_set_id").get_to(e.concept_set_id);
  j.at("matrix").get_to(e.matrix);
}

void to_json(json& j, const SimilarityMatrix& s) {
  j = json{{"grid_h", s.grid_h}, {"grid_w", s.grid_w}, {"values", s.values}};
}

void from_json(const json& j, SimilarityMatrix& s) {
  j.at("grid_h").get_to(s.grid_h);
  j.at("grid_w").get_to(s.grid_w);
  j.at("values").get_to(s.values);
  if (s.values.rows() != s.grid_h * s.grid_w) {
    throw json::other_error::create(501, "similarity matrix rows do not match grid", &j);
  }
}

void to_json(json& j, const ConceptVector& c) {
  j = json{{"concept_set_id", c.concept_set_id}, {"raw", c.raw}, {"normalized", c.normalized}};
}

void from_json(const json& j, ConceptVector& c) {
  j.at("concept_set_id").get_to(c.concept_set_id);
  j.at("raw").get_to(c.raw);
  j.at("normalized").get_to(c.normalized);
}

void to_json(json& j, const Prediction& p) {
  j = json{{"logits", p.logits},
           {"probabilities", p.probabilities},
           {"predicted_index", p.predicted_index},
           {"predicted_label", p.predicted_label}};
}

void from_json(const json& j, Prediction& p) {
  j.at("logits").get_to(p.logits);
  j.at("probabilities").get_to(p.probabilities);
  j.at("predicted_index").get_to(p.predicted_index);
  j.at("predicted_label").get_to(p.predicted_label);
}

namespace {

template <typename T>
T load_json_file(const std::filesystem::path& path, const char* what) {
  const auto text = util::read_text_file(path);
  try {
    return json::parse(text).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, std::string(what) + " " + path.string() + ": " + e.what());
  }
}

}  // namespace

ConceptSet load_concept_set(const std::filesystem::path& path) {
  auto set = load_json_file<ConceptSet>(path, "concept set");
  validate(set);
  return set;
}

void save_concept_set(const ConceptSet& set, const std::filesystem::path& path) {
  util::write_file_atomic(path, json(set).dump(2) + "\n");
}

LinearClassifier load_classifier(const std::filesystem::path& path) {
  auto model = load_json_file<LinearClassifier>(path, "classifier");
  try {
    validate(model);
  } catch (const Error& e) {
    throw Error(Errc::invalid_config, "classifier " + path.string() + ": " + e.what());
  }
  return model;
}

void save_classifier(const LinearClassifier& model, const std::filesystem::path& path) {
  util::write_file_atomic(path, json(model).dump(2) + "\n");
}

ConceptEmbeddings load_concept_embeddings(const std::filesystem::path& path) {
  return load_json_file<ConceptEmbeddings>(path, "concept embeddings");
}

void save_concept_embeddings(const ConceptEmbeddings& e, const std::filesystem::path& path) {
  util::write_file_atomic(path, json(e).dump() + "\n");
}

}  // namespace cbmrag::cbm
