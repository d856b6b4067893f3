#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "cbmrag/providers/provider.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::providers {

// Deterministic stand-in for the neural services.
//
// Every vector is generated from a SHA-256 digest of a domain-tagged input:
// the first 8 digest bytes (big-endian) seed a xorshift64* generator, each draw
// is mapped to [-1, 1) via the top 53 bits, and the finished vector is
// L2-normalised. Inputs are tagged as
//   text:  "text:" + text
//   image: "image:" + bytes + decimal token index
// so text and image vectors never collide.
EmbeddingVector fixture_vector(const util::Sha256Digest& digest, std::size_t dim);

struct FixtureConfig {
  std::size_t dim = 8;
  std::size_t grid_h = 14;
  std::size_t grid_w = 14;
  // lowercase hex SHA-256 of the media bytes -> transcript
  std::map<std::string, std::string> transcripts;
};

// Reads {"<sha256 hex>": "transcript", ...}.
std::map<std::string, std::string> load_transcripts(const std::filesystem::path& path);

class FixtureProvider final : public TextEmbedder, public ImageEmbedder, public Transcriber {
 public:
  explicit FixtureProvider(FixtureConfig config);

  std::size_t dimension() const override { return config_.dim; }
  const FixtureConfig& config() const noexcept { return config_; }

 protected:
  std::vector<EmbeddingVector> do_embed_text(std::span<const std::string> texts) override;
  ImageTokenEmbeddings do_embed_image(std::span<const std::uint8_t> image_bytes,
                                      std::string_view media_type) override;
  TranscriptionResult do_transcribe(std::span<const std::uint8_t> media_bytes,
                                    std::string_view media_type) override;

 private:
  FixtureConfig config_;
};

// Replays a fixed list of replies in order. Every call is recorded so tests can
// inspect the prompts an agent produced.
class ScriptedChatModel final : public ChatModel {
 public:
  explicit ScriptedChatModel(std::vector<std::string> replies);

  // Reads {"replies": [s...]}.
  static ScriptedChatModel from_file(const std::filesystem::path& path);
  static std::vector<std::string> load_script(const std::filesystem::path& path);

  std::size_t calls_made() const;
  std::size_t remaining() const;
  std::vector<std::vector<ChatMessage>> recorded_calls() const;

 protected:
  std::string do_complete(std::span<const ChatMessage> messages, double temperature,
                          int max_tokens) override;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> replies_;
  std::size_t cursor_ = 0;
  std::vector<std::vector<ChatMessage>> calls_;
};

}  // namespace cbmrag::providers
