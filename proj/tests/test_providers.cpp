#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <mutex>

#include <nlohmann/json.hpp>

#include "cbmrag/providers/fixture.hpp"
#include "cbmrag/providers/http_provider.hpp"
#include "cbmrag/util.hpp"
#include "support/test_support.hpp"

using namespace cbmrag;
using namespace cbmrag::providers;
using nlohmann::json;
using test_support::LocalServer;
using test_support::TempDir;

namespace {

// Frozen from tests/oracles/fixture_generator.py.
const std::vector<double> kOpacityD8{
    0.42397128114521815,  0.16905875108586588, -0.3007279495415747, -0.6690367206409662,
    -0.21889462233794468, -0.375190272639558,  0.18062494880964988, 0.17975563896458344};
const std::vector<double> kDryCoughD4{0.6157940776297331, 0.34110899969057457,
                                      0.43800796324290664, -0.5590986750315566};
const util::Bytes kOracleImage{0x89, 0x50, 0x4E, 0x47, 1, 2, 3};
const std::vector<double> kImageToken0{0.442201489933233,   0.018788136786335098,
                                       0.16792964693287812, -0.1062268988028243,
                                       0.3550456432051553,  -0.5303439876348702,
                                       0.46903607216820475, 0.3705446489888433};
const std::vector<double> kImageToken1{-0.32353683002047556, 0.42196556641568744,
                                       -0.40104529486212626, -0.2994878899826661,
                                       0.015148910188751318, -0.5351324685357622,
                                       -0.36598081471038657, -0.21494290056967882};
const std::vector<double> kImageToken195{-0.06421797357427295, -0.4811532003378359,
                                         0.4474580426369102,   -0.06389477935720896,
                                         0.4362176442376143,   -0.43502383359468205,
                                         -0.33789812071859754, 0.25760376161912624};

void check_close(const std::vector<double>& got, const std::vector<double>& want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-15));
}

FixtureProvider fixture(std::size_t dim = 8) { return FixtureProvider(FixtureConfig{dim, 14, 14, {}}); }

std::vector<ChatMessage> one_message(const std::string& text = "hi") {
  return {ChatMessage{Role::user, text}};
}

// Records every request and answers from a programmable handler.
struct MockSidecar {
  httplib::Server server;
  std::mutex mutex;
  std::vector<std::pair<std::string, json>> requests;
  std::vector<std::string> auth_headers;
  std::function<void(const std::string&, const json&, httplib::Response&)> respond;

  MockSidecar() {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      json body = json::parse(req.body, nullptr, false);
      {
        std::lock_guard lock(mutex);
        requests.emplace_back(req.path, body);
        auth_headers.push_back(req.get_header_value("Authorization"));
      }
      respond(req.path, body, res);
    };
    server.Post(R"(/.*)", handler);
  }

  std::size_t count() {
    std::lock_guard lock(mutex);
    return requests.size();
  }
};

ProviderConfig config_for(const LocalServer& local, int max_retries = 3) {
  ProviderConfig c;
  c.endpoint = local.url();
  c.model_name = "m";
  c.timeout_s = 5;
  c.max_retries = max_retries;
  return c;
}

HttpProvider::Sleeper recording_sleeper(std::vector<double>& delays) {
  return [&delays](std::chrono::duration<double> d) { delays.push_back(d.count()); };
}

}  // namespace

TEST_SUITE("util") {
  TEST_CASE("sha256 and hex of a known vector") {
    CHECK(util::to_hex(util::sha256(util::as_bytes("abc"))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("base64 round trip and known encodings") {
    CHECK(util::base64_encode(util::as_bytes("")) == "");
    CHECK(util::base64_encode(util::as_bytes("f")) == "Zg==");
    CHECK(util::base64_encode(util::as_bytes("fo")) == "Zm8=");
    CHECK(util::base64_encode(util::as_bytes("foobar")) == "Zm9vYmFy");
    CHECK(util::base64_decode("Zm8=") == util::Bytes{'f', 'o'});
    CHECK(util::base64_decode("Zg==") == util::Bytes{'f'});
    util::Bytes all(256);
    for (int i = 0; i < 256; ++i) all[i] = static_cast<std::uint8_t>(i);
    CHECK(util::base64_decode(util::base64_encode(all)) == all);
    CHECK_ERRC(util::base64_decode("@@@"), Errc::invalid_argument);
  }

  TEST_CASE("utf8 validation") {
    CHECK(util::is_valid_utf8("plain ascii"));
    CHECK(util::is_valid_utf8("caf\xc3\xa9"));
    CHECK_FALSE(util::is_valid_utf8("\xc3"));
    CHECK_FALSE(util::is_valid_utf8("\xff\xfe"));
  }
}

TEST_SUITE("fixture provider") {
  TEST_CASE("text vector matches the seeded generator oracle") {
    auto p = fixture(8);
    const auto v = p.embed_text(std::vector<std::string>{"opacity"});
    REQUIRE(v.size() == 1);
    check_close(v[0].values, kOpacityD8);

    auto p4 = fixture(4);
    check_close(p4.embed_text(std::vector<std::string>{"patient reports dry cough"})[0].values,
                kDryCoughD4);
  }

  TEST_CASE("text vectors are unit norm, ordered and deterministic") {
    auto p = fixture(16);
    const std::vector<std::string> in{"a", "b", "opacity", "a"};
    const auto first = p.embed_text(in);
    const auto second = p.embed_text(in);
    CHECK(first == second);
    CHECK(first[0] == first[3]);
    CHECK(first[0] != first[1]);
    for (const auto& v : first) {
      double n = 0;
      for (double x : v.values) n += x * x;
      CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(v.dim() == 16);
    }
  }

  TEST_CASE("embed_text preconditions") {
    auto p = fixture();
    CHECK_ERRC(p.embed_text(std::vector<std::string>{}), Errc::empty_input);
    CHECK_ERRC(p.embed_text(std::vector<std::string>{"ok", "   "}), Errc::empty_input);
  }

  TEST_CASE("image tokens match the oracle on a 14x14 grid") {
    auto p = fixture(8);
    const auto img = p.embed_image(kOracleImage, "image/png");
    CHECK(img.grid_h == 14);
    CHECK(img.grid_w == 14);
    REQUIRE(img.tokens.size() == 196);
    check_close(img.tokens[0].values, kImageToken0);
    check_close(img.tokens[1].values, kImageToken1);
    check_close(img.tokens[195].values, kImageToken195);
    CHECK(p.embed_image(kOracleImage, "image/jpeg") == img);
  }

  TEST_CASE("image preconditions") {
    auto p = fixture();
    CHECK_ERRC(p.embed_image(kOracleImage, "application/pdf"), Errc::unsupported_media_type);
    CHECK_ERRC(p.embed_image(util::Bytes{}, "image/png"), Errc::invalid_argument);
  }

  TEST_CASE("transcription table lookup") {
    const util::Bytes media{'I', 'D', '3', 1, 2, 3};
    FixtureConfig cfg;
    cfg.transcripts[util::to_hex(util::sha256(media))] = "patient reports dry cough";
    FixtureProvider p(cfg);
    const auto hit = p.transcribe(media, "audio/mpeg");
    CHECK(hit.text == "patient reports dry cough");
    CHECK(hit.media_id == util::to_hex(util::sha256(media)));
    CHECK(p.transcribe(util::Bytes{9, 9}, "video/mp4").text.empty());
    CHECK_ERRC(p.transcribe(media, "text/plain"), Errc::unsupported_media_type);
  }

  TEST_CASE("shipped transcript table loads") {
    const auto t = load_transcripts(test_support::data_dir() / "fixtures/transcripts.json");
    const auto media =
        util::read_binary_file(test_support::data_dir() / "fixtures/media/clinician_dictation.mp3");
    FixtureConfig cfg;
    cfg.transcripts = t;
    FixtureProvider p(cfg);
    CHECK_FALSE(p.transcribe(media, "audio/mpeg").text.empty());
  }

  TEST_CASE("invalid fixture config") {
    CHECK_ERRC(FixtureProvider(FixtureConfig{0, 14, 14, {}}), Errc::invalid_config);
    CHECK_ERRC(FixtureProvider(FixtureConfig{8, 0, 14, {}}), Errc::invalid_config);
  }
}

TEST_SUITE("scripted chat model") {
  TEST_CASE("replays replies in order then runs out") {
    ScriptedChatModel m({"Final Answer: ok"});
    CHECK(m.complete(one_message(), 0.0, 16) == "Final Answer: ok");
    CHECK(m.calls_made() == 1);
    CHECK(m.remaining() == 0);
    CHECK_ERRC(m.complete(one_message(), 0.0, 16), Errc::script_exhausted);
  }

  TEST_CASE("records prompts") {
    ScriptedChatModel m({"a", "b"});
    m.complete(one_message("first"), 0.0, 16);
    m.complete(std::vector<ChatMessage>{{Role::system, "sys"}, {Role::user, "second"}}, 0.0, 16);
    const auto calls = m.recorded_calls();
    REQUIRE(calls.size() == 2);
    CHECK(calls[0][0].content == "first");
    CHECK(calls[1][0].role == Role::system);
  }

  TEST_CASE("preconditions") {
    ScriptedChatModel m({"a"});
    CHECK_ERRC(m.complete(std::vector<ChatMessage>{}, 0.0, 16), Errc::invalid_argument);
    CHECK_ERRC(m.complete(one_message(), 0.0, 0), Errc::invalid_argument);
    CHECK(m.remaining() == 1);
  }

  TEST_CASE("script file") {
    TempDir dir;
    util::write_file_atomic(dir / "s.json", R"({"replies": ["one", "two"]})");
    auto m = ScriptedChatModel::from_file(dir / "s.json");
    CHECK(m.complete(one_message(), 0, 1) == "one");
    CHECK(m.complete(one_message(), 0, 1) == "two");
    util::write_file_atomic(dir / "bad.json", R"({"answers": []})");
    CHECK_ERRC(ScriptedChatModel::load_script(dir / "bad.json"), Errc::invalid_config);
  }

  TEST_CASE("roles") {
    CHECK(role_from_string("assistant") == Role::assistant);
    CHECK(std::string(to_string(Role::system)) == "system");
    CHECK_ERRC(role_from_string("tool"), Errc::invalid_argument);
  }
}

TEST_SUITE("http provider wire contract") {
  TEST_CASE("embed_text request and response") {
    MockSidecar mock;
    mock.respond = [](const std::string&, const json& body, httplib::Response& res) {
      json vectors = json::array();
      for (std::size_t i = 0; i < body["inputs"].size(); ++i) vectors.push_back({1.0 * i, 0.5, -0.25});
      res.set_content(json{{"dim", 3}, {"vectors", vectors}}.dump(), "application/json");
    };
    LocalServer local(mock.server);
    HttpProvider p(config_for(local));
    const auto out = p.embed_text(std::vector<std::string>{"x", "y"});
    REQUIRE(out.size() == 2);
    CHECK(out[1].values == std::vector<double>{1.0, 0.5, -0.25});
    CHECK(p.dimension() == 3);
    REQUIRE(mock.requests.size() == 1);
    CHECK(mock.requests[0].first == "/v1/embed/text");
    CHECK(mock.requests[0].second == json{{"model", "m"}, {"inputs", {"x", "y"}}});
    CHECK(mock.auth_headers[0].empty());
  }

  TEST_CASE("embed_image sends base64 and parses the token grid") {
    MockSidecar mock;
    util::Bytes received;
    mock.respond = [&](const std::string&, const json& body, httplib::Response& res) {
      received = util::base64_decode(body["image_b64"].get<std::string>());
      json tokens = json::array();
      for (int i = 0; i < 6; ++i) tokens.push_back({i * 0.1, 1.0});
      res.set_content(json{{"dim", 2}, {"grid_h", 2}, {"grid_w", 3}, {"tokens", tokens}}.dump(),
                      "application/json");
    };
    LocalServer local(mock.server);
    HttpProvider p(config_for(local));
    const util::Bytes image{0, 1, 2, 250, 251, 252, 253};
    const auto out = p.embed_image(image, "image/png");
    CHECK(received == image);
    CHECK(out.grid_h == 2);
    CHECK(out.grid_w == 3);
    CHECK(out.tokens.size() == 6);
    CHECK(mock.requests[0].first == "/v1/embed/image");
    CHECK(mock.requests[0].second["media_type"] == "image/png");
    CHECK(mock.requests[0].second["model"] == "m");
  }

  TEST_CASE("embed_image rejects a grid that does not match the token count") {
    MockSidecar mock;
    mock.respond = [](const std::string&, const json&, httplib::Response& res) {
      res.set_content(R"({"dim":1,"grid_h":2,"grid_w":2,"tokens":[[1],[1],[1]]})",
                      "application/json");
    };
    LocalServer local(mock.server);
    HttpProvider p(config_for(local));
    CHECK_ERRC(p.embed_image(util::Bytes{1}, "image/png"), Errc::malformed_response);
  }

  TEST_CASE("transcribe and complete") {
    MockSidecar mock;
    mock.respond = [](const std::string& path, const json& body, httplib::Response& res) {
      if (path == "/v1/transcribe") {
        res.set_content(json{{"text", "heard " + body["media_type"].get<std::string>()}}.dump(),
                        "application/json");
      } else {
        res.set_content(json{{"text", "reply to " + body["messages"].back()["content"].get<std::string>()}}.dump(),
                        "application/json");
      }
    };
    LocalServer local(mock.server);
    HttpProvider p(config_for(local));
    CHECK(p.transcribe(util::Bytes{1, 2}, "audio/mpeg").text == "heard audio/mpeg");
    CHECK(mock.requests[0].second["media_b64"] == "AQI=");
    const auto reply = p.complete(
        std::vector<ChatMessage>{{Role::system, "s"}, {Role::user, "q"}}, 0.25, 77);
    CHECK(reply == "reply to q");
    const auto& body = mock.requests[1].second;
    CHECK(mock.requests[1].first == "/v1/complete");
    CHECK(body["messages"] == json::parse(R"([{"role":"system","content":"s"},{"role":"user","content":"q"}])"));
    CHECK(body["temperature"] == 0.25);
    CHECK(body["max_tokens"] == 77);
  }

  TEST_CASE("bearer token from the configured environment variable") {
    MockSidecar mock;
    mock.respond = [](const std::string&, const json&, httplib::Response& res) {
      res.set_content(R"({"text":"ok"})", "application/json");
    };
    LocalServer local(mock.server);
    ::setenv("CBMRAG_TEST_TOKEN", "s3cret", 1);
    auto cfg = config_for(local);
    cfg.auth_token_env = "CBMRAG_TEST_TOKEN";
    HttpProvider p(cfg);
    p.complete(one_message(), 0, 8);
    CHECK(mock.auth_headers.at(0) == "Bearer s3cret");
    ::unsetenv("CBMRAG_TEST_TOKEN");
  }

  TEST_CASE("endpoint path prefix") {
    MockSidecar mock;
    mock.respond = [](const std::string&, const json&, httplib::Response& res) {
      res.set_content(R"({"text":"ok"})", "application/json");
    };
    LocalServer local(mock.server);
    auto cfg = config_for(local);
    cfg.endpoint += "/sidecar/";
    HttpProvider p(cfg);
    p.complete(one_message(), 0, 8);
    CHECK(mock.requests.at(0).first == "/sidecar/v1/complete");
  }

  TEST_CASE("a provider that always fails is called max_retries + 1 times") {
    for (int retries : {0, 1, 3}) {
      MockSidecar mock;
      mock.respond = [](const std::string&, const json&, httplib::Response& res) {
        res.status = 503;
      };
      LocalServer local(mock.server);
      std::vector<double> delays;
      HttpProvider p(config_for(local, retries), recording_sleeper(delays));
      CHECK_ERRC(p.complete(one_message(), 0, 8), Errc::remote_unavailable);
      CHECK(mock.count() == static_cast<std::size_t>(retries + 1));
      std::vector<double> want;
      for (int i = 0; i < retries; ++i) want.push_back(0.5 * std::pow(2.0, i));
      CHECK(delays == want);
    }
  }

  TEST_CASE("recovers when a retry succeeds") {
    MockSidecar mock;
    std::atomic<int> calls{0};
    mock.respond = [&](const std::string&, const json&, httplib::Response& res) {
      if (calls++ == 0) {
        res.status = 500;
        return;
      }
      res.set_content(R"({"text":"second time"})", "application/json");
    };
    LocalServer local(mock.server);
    std::vector<double> delays;
    HttpProvider p(config_for(local), recording_sleeper(delays));
    CHECK(p.complete(one_message(), 0, 8) == "second time");
    CHECK(delays == std::vector<double>{0.5});
  }

  TEST_CASE("unreachable endpoint is a transport failure") {
    int port = 0;
    {
      httplib::Server s;
      LocalServer local(s);
      port = local.port();
    }
    ProviderConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
    cfg.max_retries = 2;
    cfg.timeout_s = 1;
    std::vector<double> delays;
    HttpProvider p(cfg, recording_sleeper(delays));
    CHECK_ERRC(p.embed_text(std::vector<std::string>{"x"}), Errc::remote_unavailable);
    CHECK(delays.size() == 2);
  }

  TEST_CASE("malformed JSON is not retried") {
    MockSidecar mock;
    mock.respond = [](const std::string&, const json&, httplib::Response& res) {
      res.set_content("{not json", "application/json");
    };
    LocalServer local(mock.server);
    HttpProvider p(config_for(local));
    CHECK_ERRC(p.complete(one_message(), 0, 8), Errc::malformed_response);
    CHECK(mock.count() == 1);
  }

  TEST_CASE("dimension coherence") {
    MockSidecar mock;
    std::atomic<int> dim{3};
    mock.respond = [&](const std::string&, const json&, httplib::Response& res) {
      const int d = dim.load();
      res.set_content(json{{"dim", d}, {"vectors", {std::vector<double>(d, 0.5)}}}.dump(),
                      "application/json");
    };
    LocalServer local(mock.server);
    HttpProvider p(config_for(local));
    p.embed_text(std::vector<std::string>{"a"});
    dim = 4;
    CHECK_ERRC(p.embed_text(std::vector<std::string>{"a"}), Errc::dimension_mismatch);

    mock.respond = [](const std::string&, const json&, httplib::Response& res) {
      res.set_content(R"({"dim":2,"vectors":[[1,2],[1,2,3]]})", "application/json");
    };
    HttpProvider q(config_for(local));
    CHECK_ERRC(q.embed_text(std::vector<std::string>{"a", "b"}), Errc::dimension_mismatch);

    auto cfg = config_for(local);
    cfg.expected_dim = 5;
    mock.respond = [](const std::string&, const json&, httplib::Response& res) {
      res.set_content(R"({"dim":2,"vectors":[[1,2]]})", "application/json");
    };
    HttpProvider r(cfg);
    CHECK(r.dimension() == 5);
    CHECK_ERRC(r.embed_text(std::vector<std::string>{"a"}), Errc::dimension_mismatch);
  }

  TEST_CASE("non-finite values are rejected") {
    MockSidecar mock;
    mock.respond = [](const std::string&, const json&, httplib::Response& res) {
      res.set_content(R"({"dim":2,"vectors":[[1,"x"]]})", "application/json");
    };
    LocalServer local(mock.server);
    HttpProvider p(config_for(local));
    CHECK_ERRC(p.embed_text(std::vector<std::string>{"a"}), Errc::malformed_response);
  }

  TEST_CASE("config validation") {
    ProviderConfig cfg;
    cfg.endpoint = "ftp://x";
    CHECK_ERRC(HttpProvider{cfg}, Errc::invalid_config);
    cfg.endpoint = "http://x";
    cfg.timeout_s = 0;
    CHECK_ERRC(HttpProvider{cfg}, Errc::invalid_config);
    cfg.timeout_s = 1;
    cfg.max_retries = -1;
    CHECK_ERRC(HttpProvider{cfg}, Errc::invalid_config);
  }
}

TEST_SUITE("projection") {
  TEST_CASE("maps text vectors into image space") {
    Projection p(2, 3, {1, 0, 2, 0, 1, -1});
    const auto out = p.apply(EmbeddingVector{{3, 4}});
    CHECK(out.values == std::vector<double>{3, 4, 2});
    CHECK_ERRC(p.apply(EmbeddingVector{{1, 2, 3}}), Errc::dimension_mismatch);
    CHECK_ERRC(Projection(2, 2, {1, 2, 3}), Errc::invalid_config);
  }

  TEST_CASE("loads from file") {
    TempDir dir;
    util::write_file_atomic(dir / "p.json", R"({"d_text":1,"d_image":2,"matrix":[[0.5,2]]})");
    const auto p = Projection::load(dir / "p.json");
    CHECK(p.apply(EmbeddingVector{{2}}).values == std::vector<double>{1, 4});
    util::write_file_atomic(dir / "q.json", R"({"d_text":2,"d_image":2,"matrix":[[0.5,2]]})");
    CHECK_ERRC(Projection::load(dir / "q.json"), Errc::invalid_config);
  }
}
