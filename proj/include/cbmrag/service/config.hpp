#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "cbmrag/agents/chat.hpp"
#include "cbmrag/agents/pipeline.hpp"
#include "cbmrag/providers/fixture.hpp"
#include "cbmrag/providers/http_provider.hpp"
#include "cbmrag/retrieval/chunker.hpp"

namespace cbmrag::service {

struct ProvidersConfig {
  std::string mode = "fixture";  // "fixture" | "http" (embeddings + transcription)
  providers::FixtureConfig fixture;
  std::filesystem::path fixture_transcripts;  // optional JSON hash -> transcript
  std::string chat_mode = "scripted";         // "scripted" | "http"
  std::filesystem::path chat_script;
  providers::ProviderConfig text;
  providers::ProviderConfig image;
  providers::ProviderConfig transcribe;
  providers::ProviderConfig chat;
  std::filesystem::path projection;  // optional d_text x d_image matrix
};

struct Config {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path store_dir = "data/stores";
  std::filesystem::path session_dir = "var/sessions";
  std::filesystem::path model = "data/models/demo_classifier.json";
  std::filesystem::path concepts = "data/concepts/curated_default.json";
  std::filesystem::path prompts_dir = "prompts";
  retrieval::ChunkingParams chunking;
  agents::PipelineOptions pipeline;
  agents::ChatOptions chat;
  ProvidersConfig providers;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

// Parses a TOML config. Every key can be overridden by an environment
// variable named CBMRAG_<SECTION>_<KEY> (dots become underscores, upper
// case), e.g. CBMRAG_SERVER_PORT or CBMRAG_PROVIDERS_HTTP_TEXT_ENDPOINT.
// Relative paths are resolved against `base_dir`.
// Errors: invalid_config, with "<source>:<line>:<column>" for syntax errors.
Config parse_config(std::string_view toml_text, const std::string& source_name,
                    const std::filesystem::path& base_dir, const EnvLookup& env = process_env);
Config load_config(const std::filesystem::path& path, const EnvLookup& env = process_env);

// Defaults with environment overrides only; paths relative to `base_dir`.
Config default_config(const std::filesystem::path& base_dir, const EnvLookup& env = process_env);

// Builds the provider set described by the config.
// Errors: invalid_config, io_failure.
providers::ProviderSet make_providers(const ProvidersConfig& config);

}  // namespace cbmrag::service
