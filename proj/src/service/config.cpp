#include "cbmrag/service/config.hpp"

#include <cstdlib>
#include <memory>

#include <toml.hpp>

#include "cbmrag/error.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::service {

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

namespace {

std::string env_name(std::string_view key) {
  std::string out = "CBMRAG_";
  for (char c : key) {
    out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return out;
}

// Looks up a dotted key, preferring the environment over the TOML document.
class Reader {
 public:
  Reader(const toml::table* root, const EnvLookup& env, std::filesystem::path base_dir)
      : root_(root), env_(env), base_dir_(std::move(base_dir)) {}

  void get(std::string_view key, std::string& out) const {
    if (auto e = env_(env_name(key))) {
      out = *e;
      return;
    }
    if (auto node = find(key)) {
      auto v = node.value<std::string>();
      if (!v || !node.is_string()) throw bad_type(key, "a string");
      out = *v;
    }
  }

  void get(std::string_view key, long long& out) const {
    if (auto e = env_(env_name(key))) {
      try {
        std::size_t used = 0;
        out = std::stoll(*e, &used);
        if (used != e->size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw Error(Errc::invalid_config, env_name(key) + ": expected an integer");
      }
      return;
    }
    if (auto node = find(key)) {
      if (!node.is_integer()) throw bad_type(key, "an integer");
      out = *node.value<long long>();
    }
  }

  void get(std::string_view key, int& out) const {
    long long v = out;
    get(key, v);
    out = static_cast<int>(v);
  }

  void get(std::string_view key, std::size_t& out) const {
    long long v = static_cast<long long>(out);
    get(key, v);
    if (v < 0) throw Error(Errc::invalid_config, std::string(key) + ": must be >= 0");
    out = static_cast<std::size_t>(v);
  }

  void get(std::string_view key, double& out) const {
    if (auto e = env_(env_name(key))) {
      try {
        std::size_t used = 0;
        out = std::stod(*e, &used);
        if (used != e->size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw Error(Errc::invalid_config, env_name(key) + ": expected a number");
      }
      return;
    }
    if (auto node = find(key)) {
      if (!node.is_number()) throw bad_type(key, "a number");
      out = *node.value<double>();
    }
  }

  void get(std::string_view key, std::filesystem::path& out) const {
    std::string s;
    bool found = false;
    if (auto e = env_(env_name(key))) {
      s = *e;
      found = true;
    } else if (auto node = find(key)) {
      if (!node.is_string()) throw bad_type(key, "a string");
      s = *node.value<std::string>();
      found = true;
    }
    if (found) out = s;
    if (!out.empty() && out.is_relative()) out = base_dir_ / out;
  }

 private:
  toml::node_view<const toml::node> find(std::string_view key) const {
    if (!root_) return {};
    return root_->at_path(key);
  }

  static Error bad_type(std::string_view key, const char* expected) {
    return Error(Errc::invalid_config, std::string(key) + ": expected " + expected);
  }

  const toml::table* root_;
  const EnvLookup& env_;
  std::filesystem::path base_dir_;
};

void read_provider(const Reader& r, const std::string& prefix, providers::ProviderConfig& p) {
  r.get(prefix + ".endpoint", p.endpoint);
  r.get(prefix + ".model", p.model_name);
  r.get(prefix + ".timeout_s", p.timeout_s);
  r.get(prefix + ".max_retries", p.max_retries);
  r.get(prefix + ".auth_token_env", p.auth_token_env);
  r.get(prefix + ".backoff_base_s", p.backoff_base_s);
  r.get(prefix + ".expected_dim", p.expected_dim);
}

Config read_all(const Reader& r) {
  Config c;
  r.get("server.host", c.host);
  r.get("server.port", c.port);
  r.get("paths.store_dir", c.store_dir);
  r.get("paths.session_dir", c.session_dir);
  r.get("paths.model", c.model);
  r.get("paths.concepts", c.concepts);
  r.get("paths.prompts_dir", c.prompts_dir);
  r.get("chunking.max_chars", c.chunking.max_chars);
  r.get("chunking.overlap", c.chunking.overlap);

  r.get("agents.max_iterations", c.pipeline.max_iterations);
  r.get("agents.top_concepts", c.pipeline.top_concepts);
  r.get("agents.retrieval_k", c.pipeline.retrieval_k);
  r.get("agents.upload_hits", c.pipeline.upload_hits);
  r.get("agents.temperature", c.pipeline.temperature);
  r.get("agents.max_tokens", c.pipeline.max_tokens);
  r.get("agents.history_turns", c.chat.history_turns);
  c.chat.max_iterations = c.pipeline.max_iterations;
  c.chat.retrieval_k = c.pipeline.retrieval_k;
  c.chat.temperature = c.pipeline.temperature;
  c.chat.max_tokens = c.pipeline.max_tokens;

  auto& p = c.providers;
  r.get("providers.mode", p.mode);
  r.get("providers.fixture.dim", p.fixture.dim);
  r.get("providers.fixture.grid_h", p.fixture.grid_h);
  r.get("providers.fixture.grid_w", p.fixture.grid_w);
  r.get("providers.fixture.transcripts", p.fixture_transcripts);
  r.get("providers.chat.mode", p.chat_mode);
  r.get("providers.chat.script", p.chat_script);
  r.get("providers.projection", p.projection);
  read_provider(r, "providers.http.text", p.text);
  read_provider(r, "providers.http.image", p.image);
  read_provider(r, "providers.http.transcribe", p.transcribe);
  read_provider(r, "providers.http.chat", p.chat);

  if (c.port < 0 || c.port > 65535) throw Error(Errc::invalid_config, "server.port out of range");
  if (c.chunking.max_chars == 0 || c.chunking.overlap >= c.chunking.max_chars) {
    throw Error(Errc::invalid_config, "chunking: need 0 <= overlap < max_chars");
  }
  if (c.pipeline.max_iterations < 1) {
    throw Error(Errc::invalid_config, "agents.max_iterations must be >= 1");
  }
  if (p.mode != "fixture" && p.mode != "http") {
    throw Error(Errc::invalid_config, "providers.mode must be \"fixture\" or \"http\"");
  }
  if (p.chat_mode != "scripted" && p.chat_mode != "http") {
    throw Error(Errc::invalid_config, "providers.chat.mode must be \"scripted\" or \"http\"");
  }
  return c;
}

}  // namespace

Config parse_config(std::string_view toml_text, const std::string& source_name,
                    const std::filesystem::path& base_dir, const EnvLookup& env) {
  toml::table table;
  try {
    table = toml::parse(toml_text, std::string_view(source_name));
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    throw Error(Errc::invalid_config, source_name + ":" + std::to_string(where.line) + ":" +
                                          std::to_string(where.column) + ": " +
                                          std::string(e.description()));
  }
  return read_all(Reader(&table, env, base_dir));
}

Config load_config(const std::filesystem::path& path, const EnvLookup& env) {
  std::string text;
  try {
    text = util::read_text_file(path);
  } catch (const Error& e) {
    throw Error(Errc::invalid_config, e.what());
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_config(text, path.string(), base, env);
}

Config default_config(const std::filesystem::path& base_dir, const EnvLookup& env) {
  return read_all(Reader(nullptr, env, base_dir));
}

providers::ProviderSet make_providers(const ProvidersConfig& config) {
  providers::ProviderSet set;
  if (config.mode == "fixture") {
    auto fixture_config = config.fixture;
    if (!config.fixture_transcripts.empty()) {
      fixture_config.transcripts = providers::load_transcripts(config.fixture_transcripts);
    }
    auto fixture = std::make_shared<providers::FixtureProvider>(std::move(fixture_config));
    set.text = fixture;
    set.image = fixture;
    set.transcriber = fixture;
  } else {
    set.text = std::make_shared<providers::HttpProvider>(config.text);
    set.image = std::make_shared<providers::HttpProvider>(config.image);
    set.transcriber = std::make_shared<providers::HttpProvider>(config.transcribe);
  }
  if (config.chat_mode == "scripted") {
    if (config.chat_script.empty()) {
      set.chat = std::make_shared<providers::ScriptedChatModel>(std::vector<std::string>{});
    } else {
      set.chat = std::make_shared<providers::ScriptedChatModel>(
          providers::ScriptedChatModel::load_script(config.chat_script));
    }
  } else {
    set.chat = std::make_shared<providers::HttpProvider>(config.chat);
  }
  if (!config.projection.empty()) set.projection = providers::Projection::load(config.projection);
  return set;
}

}  // namespace cbmrag::service
