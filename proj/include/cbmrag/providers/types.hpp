#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cbmrag::providers {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

// Token-level image embeddings laid out row-major over a grid_h x grid_w grid.
struct ImageTokenEmbeddings {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::vector<EmbeddingVector> tokens;

  std::size_t dim() const noexcept { return tokens.empty() ? 0 : tokens.front().dim(); }
  bool operator==(const ImageTokenEmbeddings&) const = default;
};

struct TranscriptionResult {
  std::string text;
  std::string media_id;
};

enum class Role { system, user, assistant };

struct ChatMessage {
  Role role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

const char* to_string(Role role) noexcept;

void to_json(nlohmann::json& j, const ChatMessage& m);
void from_json(const nlohmann::json& j, ChatMessage& m);
// Throws Error(invalid_argument) for anything outside system/user/assistant.
Role role_from_string(const std::string& name);

// Throws Error(malformed_response) if any value is NaN or infinite, or if the
// token count does not match the grid, or the token dimensions disagree.
void validate(const EmbeddingVector& v);
void validate(const ImageTokenEmbeddings& image);

}  // namespace cbmrag::providers
