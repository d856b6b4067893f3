#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cbmrag/providers/types.hpp"

namespace cbmrag::providers {

bool is_image_media_type(std::string_view media_type) noexcept;       // image/png, image/jpeg
bool is_transcribable_media_type(std::string_view media_type) noexcept;  // audio/mpeg, video/mp4

// Each capability is a separate interface because in a live deployment they are
// usually backed by different models. The public entry points check the
// preconditions and then dispatch to the implementation hook.

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;

  // Errors: empty_input, remote_unavailable, dimension_mismatch.
  std::vector<EmbeddingVector> embed_text(std::span<const std::string> texts);

  // Declared embedding dimension, 0 when not known before the first call.
  virtual std::size_t dimension() const = 0;

 protected:
  virtual std::vector<EmbeddingVector> do_embed_text(std::span<const std::string> texts) = 0;
};

class ImageEmbedder {
 public:
  virtual ~ImageEmbedder() = default;

  // Errors: invalid_argument (no bytes), unsupported_media_type,
  // remote_unavailable, malformed_response.
  ImageTokenEmbeddings embed_image(std::span<const std::uint8_t> image_bytes,
                                   std::string_view media_type);

 protected:
  virtual ImageTokenEmbeddings do_embed_image(std::span<const std::uint8_t> image_bytes,
                                              std::string_view media_type) = 0;
};

class Transcriber {
 public:
  virtual ~Transcriber() = default;

  TranscriptionResult transcribe(std::span<const std::uint8_t> media_bytes,
                                 std::string_view media_type);

 protected:
  virtual TranscriptionResult do_transcribe(std::span<const std::uint8_t> media_bytes,
                                            std::string_view media_type) = 0;
};

class ChatModel {
 public:
  virtual ~ChatModel() = default;

  // Errors: invalid_argument (no messages, max_tokens < 1),
  // remote_unavailable, script_exhausted.
  std::string complete(std::span<const ChatMessage> messages, double temperature,
                       int max_tokens);

 protected:
  virtual std::string do_complete(std::span<const ChatMessage> messages, double temperature,
                                  int max_tokens) = 0;
};

// Linear map from text-embedding space (d_text) into image-embedding space
// (d_image), stored d_text x d_image row-major: out[c] = sum_r v[r] * m[r][c].
class Projection {
 public:
  Projection(std::size_t d_text, std::size_t d_image, std::vector<double> row_major);

  static Projection load(const std::filesystem::path& path);

  std::size_t input_dim() const noexcept { return d_text_; }
  std::size_t output_dim() const noexcept { return d_image_; }

  EmbeddingVector apply(const EmbeddingVector& v) const;

 private:
  std::size_t d_text_;
  std::size_t d_image_;
  std::vector<double> m_;
};

struct ProviderSet {
  std::shared_ptr<TextEmbedder> text;
  std::shared_ptr<ImageEmbedder> image;
  std::shared_ptr<Transcriber> transcriber;
  std::shared_ptr<ChatModel> chat;
  std::optional<Projection> projection;
};

}  // namespace cbmrag::providers
