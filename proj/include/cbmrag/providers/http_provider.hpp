#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "cbmrag/providers/provider.hpp"

namespace cbmrag::providers {

struct ProviderConfig {
  std::string endpoint;  // http://host:port[/prefix]
  std::string model_name;
  double timeout_s = 30.0;
  int max_retries = 3;
  std::string auth_token_env;  // empty: no Authorization header
  double backoff_base_s = 0.5;
  double backoff_factor = 2.0;
  std::size_t expected_dim = 0;  // 0: accept whatever the first response declares
};

// Throws Error(invalid_config) when the config cannot be used.
void validate(const ProviderConfig& config);

// Client for the provider wire protocol:
//   POST /v1/embed/text   {"model","inputs"}                      -> {"dim","vectors"}
//   POST /v1/embed/image  {"model","image_b64","media_type"}      -> {"dim","grid_h","grid_w","tokens"}
//   POST /v1/transcribe   {"model","media_b64","media_type"}      -> {"text"}
//   POST /v1/complete     {"model","messages","temperature","max_tokens"} -> {"text"}
// Transport failures and non-2xx replies are retried with exponential backoff;
// after max_retries + 1 attempts the call fails with remote_unavailable.
class HttpProvider final : public TextEmbedder,
                           public ImageEmbedder,
                           public Transcriber,
                           public ChatModel {
 public:
  using Sleeper = std::function<void(std::chrono::duration<double>)>;

  explicit HttpProvider(ProviderConfig config, Sleeper sleeper = {});

  std::size_t dimension() const override { return text_dim_.load(); }
  const ProviderConfig& config() const noexcept { return config_; }

 protected:
  std::vector<EmbeddingVector> do_embed_text(std::span<const std::string> texts) override;
  ImageTokenEmbeddings do_embed_image(std::span<const std::uint8_t> image_bytes,
                                      std::string_view media_type) override;
  TranscriptionResult do_transcribe(std::span<const std::uint8_t> media_bytes,
                                    std::string_view media_type) override;
  std::string do_complete(std::span<const ChatMessage> messages, double temperature,
                          int max_tokens) override;

 private:
  nlohmann::json post_with_retries(const std::string& route, const nlohmann::json& body);
  void lock_dimension(std::atomic<std::size_t>& slot, std::size_t dim, const char* what);

  ProviderConfig config_;
  Sleeper sleeper_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::atomic<std::size_t> text_dim_;
  std::atomic<std::size_t> image_dim_;
};

}  // namespace cbmrag::providers
