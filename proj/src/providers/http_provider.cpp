#include "cbmrag/providers/http_provider.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <thread>

#include "cbmrag/error.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::providers {

using nlohmann::json;

void validate(const ProviderConfig& config) {
  if (config.endpoint.rfind("http://", 0) != 0) {
    throw Error(Errc::invalid_config,
                "provider endpoint must start with http:// (got '" + config.endpoint + "')");
  }
  if (!(config.timeout_s > 0.0)) throw Error(Errc::invalid_config, "provider timeout must be > 0");
  if (config.max_retries < 0) throw Error(Errc::invalid_config, "max_retries must be >= 0");
  if (config.backoff_base_s < 0.0 || config.backoff_factor < 1.0) {
    throw Error(Errc::invalid_config, "invalid backoff parameters");
  }
}

namespace {

std::vector<double> parse_vector(const json& arr) {
  if (!arr.is_array()) throw Error(Errc::malformed_response, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& x : arr) {
    if (!x.is_number()) throw Error(Errc::malformed_response, "non-numeric vector entry");
    out.push_back(x.get<double>());
  }
  return out;
}

std::size_t parse_count(const json& body, const char* key) {
  const auto it = body.find(key);
  if (it == body.end() || !it->is_number_integer() || it->get<long long>() < 1) {
    throw Error(Errc::malformed_response, std::string("missing or invalid '") + key + "'");
  }
  return it->get<std::size_t>();
}

}  // namespace

HttpProvider::HttpProvider(ProviderConfig config, Sleeper sleeper)
    : config_(std::move(config)),
      sleeper_(std::move(sleeper)),
      text_dim_(config_.expected_dim),
      image_dim_(config_.expected_dim) {
  validate(config_);
  if (!sleeper_) {
    sleeper_ = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
  }
  const auto after_scheme = config_.endpoint.find("://") + 3;
  const auto slash = config_.endpoint.find('/', after_scheme);
  if (slash == std::string::npos) {
    scheme_host_port_ = config_.endpoint;
  } else {
    scheme_host_port_ = config_.endpoint.substr(0, slash);
    path_prefix_ = config_.endpoint.substr(slash);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
}

json HttpProvider::post_with_retries(const std::string& route, const json& body) {
  const auto payload = body.dump();
  httplib::Headers headers;
  if (!config_.auth_token_env.empty()) {
    if (const char* token = std::getenv(config_.auth_token_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  const auto timeout = std::chrono::duration<double>(config_.timeout_s);
  const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);

  std::string last_failure;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      sleeper_(std::chrono::duration<double>(
          config_.backoff_base_s * std::pow(config_.backoff_factor, attempt - 1)));
    }
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(timeout_us);
    client.set_read_timeout(timeout_us);
    client.set_write_timeout(timeout_us);
    auto res = client.Post(path_prefix_ + route, headers, payload, "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      auto parsed = json::parse(res->body);
      if (!parsed.is_object()) throw Error(Errc::malformed_response, "response is not an object");
      return parsed;
    } catch (const json::exception& e) {
      throw Error(Errc::malformed_response, route + ": invalid JSON response: " + e.what());
    }
  }
  throw Error(Errc::remote_unavailable, route + " failed after " +
                                            std::to_string(config_.max_retries + 1) +
                                            " attempts (" + last_failure + ")");
}

void HttpProvider::lock_dimension(std::atomic<std::size_t>& slot, std::size_t dim,
                                  const char* what) {
  std::size_t expected = 0;
  if (slot.compare_exchange_strong(expected, dim) || expected == dim) return;
  throw Error(Errc::dimension_mismatch, std::string(what) + ": provider returned dimension " +
                                            std::to_string(dim) + ", expected " +
                                            std::to_string(expected));
}

std::vector<EmbeddingVector> HttpProvider::do_embed_text(std::span<const std::string> texts) {
  json body{{"model", config_.model_name}, {"inputs", json::array()}};
  for (const auto& t : texts) body["inputs"].push_back(t);
  const auto reply = post_with_retries("/v1/embed/text", body);
  try {
    const auto dim = parse_count(reply, "dim");
    const auto& vectors = reply.at("vectors");
    if (!vectors.is_array()) throw Error(Errc::malformed_response, "'vectors' is not an array");
    std::vector<EmbeddingVector> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors) {
      EmbeddingVector ev{parse_vector(v)};
      if (ev.dim() != dim) {
        throw Error(Errc::dimension_mismatch, "embed_text: vector length " +
                                                  std::to_string(ev.dim()) +
                                                  " disagrees with declared dim " +
                                                  std::to_string(dim));
      }
      out.push_back(std::move(ev));
    }
    lock_dimension(text_dim_, dim, "embed_text");
    return out;
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_response, std::string("embed_text: ") + e.what());
  }
}

ImageTokenEmbeddings HttpProvider::do_embed_image(std::span<const std::uint8_t> image_bytes,
                                                  std::string_view media_type) {
  json body{{"model", config_.model_name},
            {"image_b64", util::base64_encode(image_bytes)},
            {"media_type", media_type}};
  const auto reply = post_with_retries("/v1/embed/image", body);
  try {
    ImageTokenEmbeddings out;
    const auto dim = parse_count(reply, "dim");
    out.grid_h = parse_count(reply, "grid_h");
    out.grid_w = parse_count(reply, "grid_w");
    const auto& tokens = reply.at("tokens");
    if (!tokens.is_array()) throw Error(Errc::malformed_response, "'tokens' is not an array");
    out.tokens.reserve(tokens.size());
    for (const auto& t : tokens) {
      EmbeddingVector ev{parse_vector(t)};
      if (ev.dim() != dim) {
        throw Error(Errc::dimension_mismatch, "embed_image: token length " +
                                                  std::to_string(ev.dim()) +
                                                  " disagrees with declared dim " +
                                                  std::to_string(dim));
      }
      out.tokens.push_back(std::move(ev));
    }
    if (out.tokens.size() != out.grid_h * out.grid_w) {
      throw Error(Errc::malformed_response, "embed_image: token count does not match grid");
    }
    lock_dimension(image_dim_, dim, "embed_image");
    return out;
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_response, std::string("embed_image: ") + e.what());
  }
}

TranscriptionResult HttpProvider::do_transcribe(std::span<const std::uint8_t> media_bytes,
                                                std::string_view media_type) {
  json body{{"model", config_.model_name},
            {"media_b64", util::base64_encode(media_bytes)},
            {"media_type", media_type}};
  const auto reply = post_with_retries("/v1/transcribe", body);
  const auto it = reply.find("text");
  if (it == reply.end() || !it->is_string()) {
    throw Error(Errc::malformed_response, "transcribe: missing 'text'");
  }
  return {it->get<std::string>(), util::to_hex(util::sha256(media_bytes))};
}

std::string HttpProvider::do_complete(std::span<const ChatMessage> messages, double temperature,
                                      int max_tokens) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  json body{{"model", config_.model_name},
            {"messages", std::move(msgs)},
            {"temperature", temperature},
            {"max_tokens", max_tokens}};
  const auto reply = post_with_retries("/v1/complete", body);
  const auto it = reply.find("text");
  if (it == reply.end() || !it->is_string()) {
    throw Error(Errc::malformed_response, "complete: missing 'text'");
  }
  return it->get<std::string>();
}

}  // namespace cbmrag::providers
