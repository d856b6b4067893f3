#include "cbmrag/providers/fixture.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "cbmrag/error.hpp"

namespace cbmrag::providers {

namespace {

class XorShift64Star {
 public:
  explicit XorShift64Star(std::uint64_t seed) : state_(seed == 0 ? 0x9e3779b97f4a7c15ULL : seed) {}

  std::uint64_t next() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545f4914f6cdd1dULL;
  }

  // Uniform in [-1, 1).
  double next_signed_unit() {
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return 2.0 * u - 1.0;
  }

 private:
  std::uint64_t state_;
};

}  // namespace

EmbeddingVector fixture_vector(const util::Sha256Digest& digest, std::size_t dim) {
  std::uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) seed = (seed << 8) | digest[static_cast<std::size_t>(i)];
  XorShift64Star rng(seed);
  EmbeddingVector v;
  v.values.resize(dim);
  double sq = 0.0;
  for (auto& x : v.values) {
    x = rng.next_signed_unit();
    sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (norm > 0.0) {
    for (auto& x : v.values) x /= norm;
  }
  return v;
}

std::map<std::string, std::string> load_transcripts(const std::filesystem::path& path) {
  try {
    auto j = nlohmann::json::parse(util::read_text_file(path));
    return j.get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, "transcripts " + path.string() + ": " + e.what());
  }
}

FixtureProvider::FixtureProvider(FixtureConfig config) : config_(std::move(config)) {
  if (config_.dim == 0 || config_.grid_h == 0 || config_.grid_w == 0) {
    throw Error(Errc::invalid_config, "fixture provider needs dim, grid_h and grid_w >= 1");
  }
}

std::vector<EmbeddingVector> FixtureProvider::do_embed_text(std::span<const std::string> texts) {
  static constexpr std::string_view kTag = "text:";
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    out.push_back(fixture_vector(util::sha256({util::as_bytes(kTag), util::as_bytes(t)}),
                                 config_.dim));
  }
  return out;
}

ImageTokenEmbeddings FixtureProvider::do_embed_image(std::span<const std::uint8_t> image_bytes,
                                                     std::string_view) {
  static constexpr std::string_view kTag = "image:";
  ImageTokenEmbeddings out;
  out.grid_h = config_.grid_h;
  out.grid_w = config_.grid_w;
  const auto count = config_.grid_h * config_.grid_w;
  out.tokens.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto index = std::to_string(i);
    out.tokens.push_back(fixture_vector(
        util::sha256({util::as_bytes(kTag), image_bytes, util::as_bytes(index)}), config_.dim));
  }
  return out;
}

TranscriptionResult FixtureProvider::do_transcribe(std::span<const std::uint8_t> media_bytes,
                                                   std::string_view) {
  TranscriptionResult out;
  out.media_id = util::to_hex(util::sha256(media_bytes));
  if (auto it = config_.transcripts.find(out.media_id); it != config_.transcripts.end()) {
    out.text = it->second;
  }
  return out;
}

ScriptedChatModel::ScriptedChatModel(std::vector<std::string> replies)
    : replies_(std::move(replies)) {}

std::vector<std::string> ScriptedChatModel::load_script(const std::filesystem::path& path) {
  try {
    auto j = nlohmann::json::parse(util::read_text_file(path));
    return j.at("replies").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, "script " + path.string() + ": " + e.what());
  }
}

ScriptedChatModel ScriptedChatModel::from_file(const std::filesystem::path& path) {
  return ScriptedChatModel(load_script(path));
}

std::size_t ScriptedChatModel::calls_made() const {
  std::lock_guard lock(mutex_);
  return calls_.size();
}

std::size_t ScriptedChatModel::remaining() const {
  std::lock_guard lock(mutex_);
  return replies_.size() - cursor_;
}

std::vector<std::vector<ChatMessage>> ScriptedChatModel::recorded_calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::string ScriptedChatModel::do_complete(std::span<const ChatMessage> messages, double, int) {
  std::lock_guard lock(mutex_);
  calls_.emplace_back(messages.begin(), messages.end());
  if (cursor_ >= replies_.size()) {
    throw Error(Errc::script_exhausted, "scripted chat model has no reply left (" +
                                            std::to_string(replies_.size()) + " scripted)");
  }
  return replies_[cursor_++];
}

}  // namespace cbmrag::providers
