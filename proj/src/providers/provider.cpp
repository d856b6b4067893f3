#include "cbmrag/providers/provider.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "cbmrag/error.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::providers {

const char* to_string(Role role) noexcept {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role role_from_string(const std::string& name) {
  if (name == "system") return Role::system;
  if (name == "user") return Role::user;
  if (name == "assistant") return Role::assistant;
  throw Error(Errc::invalid_argument, "unknown chat role '" + name + "'");
}

void to_json(nlohmann::json& j, const ChatMessage& m) {
  j = nlohmann::json{{"role", to_string(m.role)}, {"content", m.content}};
}

void from_json(const nlohmann::json& j, ChatMessage& m) {
  m.role = role_from_string(j.at("role").get<std::string>());
  j.at("content").get_to(m.content);
}

void validate(const EmbeddingVector& v) {
  if (v.values.empty()) throw Error(Errc::malformed_response, "empty embedding vector");
  for (double x : v.values) {
    if (!std::isfinite(x)) throw Error(Errc::malformed_response, "non-finite embedding value");
  }
}

void validate(const ImageTokenEmbeddings& image) {
  if (image.grid_h == 0 || image.grid_w == 0) {
    throw Error(Errc::malformed_response, "image grid must be at least 1x1");
  }
  if (image.tokens.size() != image.grid_h * image.grid_w) {
    throw Error(Errc::malformed_response,
                "token count " + std::to_string(image.tokens.size()) + " does not match grid " +
                    std::to_string(image.grid_h) + "x" + std::to_string(image.grid_w));
  }
  const auto d = image.tokens.front().dim();
  for (const auto& t : image.tokens) {
    validate(t);
    if (t.dim() != d) throw Error(Errc::dimension_mismatch, "image tokens differ in dimension");
  }
}

bool is_image_media_type(std::string_view media_type) noexcept {
  return media_type == "image/png" || media_type == "image/jpeg";
}

bool is_transcribable_media_type(std::string_view media_type) noexcept {
  return media_type == "audio/mpeg" || media_type == "video/mp4";
}

std::vector<EmbeddingVector> TextEmbedder::embed_text(std::span<const std::string> texts) {
  if (texts.empty()) throw Error(Errc::empty_input, "embed_text: no input texts");
  for (const auto& t : texts) {
    if (util::trim(t).empty()) throw Error(Errc::empty_input, "embed_text: blank input text");
  }
  auto out = do_embed_text(texts);
  if (out.size() != texts.size()) {
    throw Error(Errc::dimension_mismatch, "embed_text: provider returned " +
                                              std::to_string(out.size()) + " vectors for " +
                                              std::to_string(texts.size()) + " inputs");
  }
  for (const auto& v : out) {
    validate(v);
    if (v.dim() != out.front().dim()) {
      throw Error(Errc::dimension_mismatch, "embed_text: inconsistent vector lengths");
    }
  }
  return out;
}

ImageTokenEmbeddings ImageEmbedder::embed_image(std::span<const std::uint8_t> image_bytes,
                                                std::string_view media_type) {
  if (!is_image_media_type(media_type)) {
    throw Error(Errc::unsupported_media_type,
                "embed_image: unsupported media type '" + std::string(media_type) + "'");
  }
  if (image_bytes.empty()) throw Error(Errc::invalid_argument, "embed_image: empty image");
  auto out = do_embed_image(image_bytes, media_type);
  validate(out);
  return out;
}

TranscriptionResult Transcriber::transcribe(std::span<const std::uint8_t> media_bytes,
                                            std::string_view media_type) {
  if (!is_transcribable_media_type(media_type)) {
    throw Error(Errc::unsupported_media_type,
                "transcribe: unsupported media type '" + std::string(media_type) + "'");
  }
  return do_transcribe(media_bytes, media_type);
}

std::string ChatModel::complete(std::span<const ChatMessage> messages, double temperature,
                                int max_tokens) {
  if (messages.empty()) throw Error(Errc::invalid_argument, "complete: no messages");
  if (max_tokens < 1) throw Error(Errc::invalid_argument, "complete: max_tokens must be >= 1");
  return do_complete(messages, temperature, max_tokens);
}

Projection::Projection(std::size_t d_text, std::size_t d_image, std::vector<double> row_major)
    : d_text_(d_text), d_image_(d_image), m_(std::move(row_major)) {
  if (d_text_ == 0 || d_image_ == 0 || m_.size() != d_text_ * d_image_) {
    throw Error(Errc::invalid_config, "projection: matrix shape does not match dimensions");
  }
  for (double x : m_) {
    if (!std::isfinite(x)) throw Error(Errc::invalid_config, "projection: non-finite entry");
  }
}

Projection Projection::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(util::read_text_file(path));
    const auto d_text = j.at("d_text").get<std::size_t>();
    const auto d_image = j.at("d_image").get<std::size_t>();
    std::vector<double> m;
    m.reserve(d_text * d_image);
    const auto& rows = j.at("matrix");
    if (rows.size() != d_text) throw Error(Errc::invalid_config, "projection: row count");
    for (const auto& row : rows) {
      if (row.size() != d_image) throw Error(Errc::invalid_config, "projection: column count");
      for (const auto& x : row) m.push_back(x.get<double>());
    }
    return Projection(d_text, d_image, std::move(m));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, "projection " + path.string() + ": " + e.what());
  }
}

EmbeddingVector Projection::apply(const EmbeddingVector& v) const {
  if (v.dim() != d_text_) {
    throw Error(Errc::dimension_mismatch, "projection expects dimension " +
                                              std::to_string(d_text_) + ", got " +
                                              std::to_string(v.dim()));
  }
  EmbeddingVector out;
  out.values.assign(d_image_, 0.0);
  for (std::size_t r = 0; r < d_text_; ++r) {
    const double x = v.values[r];
    const double* row = m_.data() + r * d_image_;
    for (std::size_t c = 0; c < d_image_; ++c) out.values[c] += x * row[c];
  }
  return out;
}

}  // namespace cbmrag::providers
