#include <doctest.h>

#include <random>
#include <thread>

#include "cbmrag/providers/fixture.hpp"
#include "cbmrag/retrieval/chunker.hpp"
#include "cbmrag/retrieval/store.hpp"
#include "cbmrag/util.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace cbmrag;
using namespace cbmrag::retrieval;
using test_support::TempDir;

namespace {

providers::FixtureProvider fixture(std::size_t dim = 8) {
  providers::FixtureConfig cfg;
  cfg.dim = dim;
  return providers::FixtureProvider(cfg);
}

// Sentences of lowercase words, so the whitespace rule has work to do.
std::string prose(std::size_t chars, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word_len(2, 9);
  std::uniform_int_distribution<int> letter('a', 'z');
  std::string out;
  while (out.size() < chars) {
    const int n = word_len(rng);
    for (int i = 0; i < n && out.size() < chars; ++i) out += static_cast<char>(letter(rng));
    if (out.size() < chars) out += ' ';
  }
  return out;
}

// Reassembles the source from ASCII chunks using only their offsets.
std::string reassemble(const std::vector<DocumentChunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) {
    REQUIRE(c.start <= out.size());
    REQUIRE(c.end >= out.size());
    out += c.text.substr(out.size() - c.start);
  }
  return out;
}

}  // namespace

TEST_SUITE("chunking") {
  TEST_CASE("short text is one chunk") {
    const std::string text(500, 'x');
    const auto chunks = chunk_text(text, {}, "doc");
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].start == 0);
    CHECK(chunks[0].end == 500);
    CHECK(chunks[0].text == text);
    CHECK(chunks[0].doc_id == "doc");
  }

  TEST_CASE("2500 characters without whitespace") {
    const auto chunks = chunk_text(std::string(2500, 'x'), {1000, 200});
    REQUIRE(chunks.size() == 4);
    const std::vector<std::size_t> starts{0, 800, 1600, 2400};
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(chunks[i].start == starts[i]);
      CHECK(chunks[i].chunk_index == i);
    }
    CHECK(chunks[0].end == 1000);
    CHECK(chunks[2].end == 2500);
    CHECK(chunks[3].end == 2500);
    CHECK(chunks[3].text.size() == 100);
  }

  TEST_CASE("empty text yields no chunks") {
    CHECK(chunk_text("").empty());
  }

  TEST_CASE("a window starts at every stride below the length") {
    CHECK(chunk_text(std::string(800, 'y')).size() == 1);
    CHECK(chunk_text(std::string(801, 'y')).size() == 2);
    const auto chunks = chunk_text(std::string(1000, 'y'));
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[1].start == 800);
    CHECK(chunks[1].end == 1000);
  }

  TEST_CASE("whitespace shortening keeps coverage and order") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto text = prose(3000 + seed * 37, seed);
      const ChunkingParams params{300, 60};
      const auto chunks = chunk_text(text, params);
      CHECK(reassemble(chunks) == text);
      for (std::size_t i = 0; i < chunks.size(); ++i) {
        CHECK(chunks[i].start == i * 240);
        CHECK(chunks[i].end - chunks[i].start <= 300);
        CHECK(chunks[i].end - chunks[i].start == chunks[i].text.size());
        if (i + 1 < chunks.size()) {
          CHECK(chunks[i].end >= chunks[i + 1].start);
          CHECK(chunks[i].end - chunks[i].start >= 150);
        }
      }
    }
  }

  TEST_CASE("offsets count code points") {
    std::string text;
    for (int i = 0; i < 30; ++i) text += "\xC3\xA9\xE2\x82\xAC";  // e-acute, euro sign
    CHECK(utf8_length(text) == 60);
    const auto chunks = chunk_text(text, {25, 5});
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[1].start == 20);
    CHECK(chunks[1].end == 45);
    CHECK(utf8_length(chunks[1].text) == 25);
    CHECK(util::is_valid_utf8(chunks[1].text));
    CHECK(chunks[2].end == 60);
  }

  TEST_CASE("invalid parameters and encoding") {
    CHECK_ERRC(chunk_text("abc", {10, 10}), Errc::invalid_chunk_params);
    CHECK_ERRC(chunk_text("abc", {0, 0}), Errc::invalid_chunk_params);
    CHECK_ERRC(chunk_text("abc\xFF"), Errc::invalid_encoding);
    CHECK_NOTHROW(chunk_text("abc", {10, 0}));
  }
}

TEST_SUITE("store ingestion") {
  TEST_CASE("ingest counts chunks and rejects duplicates") {
    auto p = fixture();
    RetrievalStore store("pneumonia");
    CHECK(store.ingest_document("guide", std::string(2500, 'x'), p) == 4);
    CHECK(store.size() == 4);
    CHECK(store.dim() == 8);
    CHECK(store.contains_document("guide"));
    CHECK_ERRC(store.ingest_document("guide", "other text", p), Errc::duplicate_document);
    CHECK(store.size() == 4);
    CHECK(store.ingest_document("empty", "", p) == 0);
    CHECK(store.size() == 4);
    CHECK_ERRC(store.ingest_document("", "text", p), Errc::invalid_argument);
    CHECK_ERRC(store.ingest_document("bad", "\xC0\x80", p), Errc::invalid_encoding);
  }

  TEST_CASE("stored vectors equal the embedder output") {
    auto p = fixture();
    RetrievalStore store("s");
    store.ingest_document("d", "consolidation in the right lower lobe", p);
    const auto snap = store.snapshot();
    REQUIRE(snap.entries.size() == 1);
    const std::vector<std::string> in{"consolidation in the right lower lobe"};
    CHECK(snap.entries[0].vector == p.embed_text(in)[0]);
  }

  TEST_CASE("dimension mismatch against a fixed store dim") {
    auto p = fixture(8);
    RetrievalStore store("s", 16);
    CHECK_ERRC(store.ingest_document("d", "text", p), Errc::dimension_mismatch);
    CHECK(store.size() == 0);
  }

  TEST_CASE("media is transcribed then ingested") {
    const util::Bytes audio{'I', 'D', '3', 1, 2, 3};
    providers::FixtureConfig cfg;
    cfg.transcripts[util::to_hex(util::sha256(audio))] = "patient reports dry cough";
    providers::FixtureProvider p(cfg);
    RetrievalStore store(kUserUploadsStore);
    CHECK(store.ingest_media("dictation", audio, "audio/mpeg", p, p) == 1);
    const auto hits = store.query("patient reports dry cough", 1, p);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].chunk.text == "patient reports dry cough");
    CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-12));

    const util::Bytes silent{0, 0, 0};
    CHECK(store.ingest_media("silent", silent, "video/mp4", p, p) == 0);
    CHECK(store.size() == 1);
    CHECK_ERRC(store.ingest_media("dictation", audio, "audio/mpeg", p, p),
               Errc::duplicate_document);
  }

  TEST_CASE("concurrent ingestion keeps every document") {
    auto p = fixture();
    RetrievalStore store("s");
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&, t] {
        for (int i = 0; i < 10; ++i) {
          store.ingest_document("doc-" + std::to_string(t) + "-" + std::to_string(i),
                                "text " + std::to_string(t * 100 + i), p);
          (void)store.query("text", 3, p);
        }
      });
    }
    for (auto& th : threads) th.join();
    CHECK(store.size() == 40);
  }
}

TEST_SUITE("store query") {
  TEST_CASE("empty store returns nothing") {
    auto p = fixture();
    RetrievalStore store("s");
    CHECK(store.query("anything", 5, p).empty());
    CHECK_ERRC(store.query("anything", 0, p), Errc::invalid_argument);
  }

  TEST_CASE("self query scores 1 and ranks first") {
    auto p = fixture();
    RetrievalStore store("s");
    store.ingest_document("a", "ground glass opacities", p);
    store.ingest_document("b", "lobar consolidation", p);
    store.ingest_document("c", "clear lung fields", p);
    const auto hits = store.query("lobar consolidation", 2, p);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].chunk.doc_id == "b");
    CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(hits[0].score >= hits[1].score);
    CHECK(store.query("x", 10, p).size() == 3);
  }

  TEST_CASE("ties break by doc id then chunk index") {
    ChunkEmbeddingIndex index{"s", 2, {}};
    for (const auto& [doc, i] : std::vector<std::pair<std::string, std::size_t>>{
             {"b", 0}, {"a", 1}, {"a", 0}, {"c", 0}}) {
      index.entries.push_back({{doc, i, "t", 0, 1}, {{1.0, 0.0}}});
    }
    const auto hits = top_k(index, {{2.0, 0.0}}, 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].chunk.doc_id == "a");
    CHECK(hits[0].chunk.chunk_index == 0);
    CHECK(hits[1].chunk.doc_id == "a");
    CHECK(hits[1].chunk.chunk_index == 1);
    CHECK(hits[2].chunk.doc_id == "b");
  }

  TEST_CASE("top-10 of 1000 random entries matches a full sort") {
    std::mt19937_64 rng(41);
    ChunkEmbeddingIndex index{"s", 16, {}};
    std::vector<oracle::ScoredChunk> all;
    const auto q = oracle::random_vec(rng, 16);
    for (std::size_t n = 0; n < 1000; ++n) {
      const auto v = oracle::random_vec(rng, 16);
      const std::string doc = "doc" + std::to_string(n % 97);
      index.entries.push_back({{doc, n, "t", 0, 1}, {v}});
      all.push_back({doc, n, oracle::cosine(q, v)});
    }
    const auto got = top_k(index, {q}, 10);
    const auto want = oracle::top_k(all, 10);
    REQUIRE(got.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(got[i].chunk.doc_id == want[i].doc_id);
      CHECK(got[i].chunk.chunk_index == want[i].chunk_index);
      CHECK(std::abs(got[i].score - want[i].score) <= 1e-12);
    }
  }

  TEST_CASE("query dimension mismatch") {
    ChunkEmbeddingIndex index{"s", 2, {{{"a", 0, "t", 0, 1}, {{1.0, 0.0}}}}};
    CHECK_ERRC(top_k(index, {{1.0, 0.0, 0.0}}, 1), Errc::dimension_mismatch);
  }
}

TEST_SUITE("persistence") {
  TEST_CASE("round trip is exact") {
    TempDir dir;
    auto p = fixture(12);
    RetrievalStore store("covid19");
    store.ingest_document("doc", std::string(2500, 'z'), p);
    store.ingest_document("doc2", "\xC3\xA9tude radiologique", p);
    store.persist(dir / "covid19.json");
    const auto back = load_store(dir / "covid19.json");
    CHECK(back == store.snapshot());
  }

  TEST_CASE("reloaded store answers queries identically") {
    TempDir dir;
    auto p = fixture();
    {
      auto store = RetrievalStore::open(dir / "normal.json", "normal");
      store->ingest_document("a", "clear lungs, no effusion", p);
      store->ingest_document("b", "normal cardiac silhouette", p);
    }
    auto reopened = RetrievalStore::open(dir / "normal.json", "normal");
    CHECK(reopened->size() == 2);
    RetrievalStore fresh("normal");
    fresh.ingest_document("a", "clear lungs, no effusion", p);
    fresh.ingest_document("b", "normal cardiac silhouette", p);
    const auto x = reopened->query("effusion", 2, p);
    const auto y = fresh.query("effusion", 2, p);
    REQUIRE(x.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(x[i].chunk == y[i].chunk);
      CHECK(x[i].score == y[i].score);
    }
  }

  TEST_CASE("version and schema violations are corrupt_store") {
    TempDir dir;
    auto p = fixture();
    RetrievalStore store("s");
    store.ingest_document("a", "text", p);
    store.persist(dir / "s.json");
    auto j = nlohmann::json::parse(util::read_text_file(dir / "s.json"));

    auto bad = j;
    bad["format_version"] = 99;
    util::write_file_atomic(dir / "v99.json", bad.dump());
    CHECK_ERRC(load_store(dir / "v99.json"), Errc::corrupt_store);

    bad = j;
    bad["entries"][0]["vector"].push_back(0.5);
    util::write_file_atomic(dir / "dim.json", bad.dump());
    CHECK_ERRC(load_store(dir / "dim.json"), Errc::corrupt_store);

    bad = j;
    bad["entries"].push_back(j["entries"][0]);
    util::write_file_atomic(dir / "dup.json", bad.dump());
    CHECK_ERRC(load_store(dir / "dup.json"), Errc::corrupt_store);

    util::write_file_atomic(dir / "trunc.json", "{\"format_version\": 1, \"store");
    CHECK_ERRC(load_store(dir / "trunc.json"), Errc::corrupt_store);

    CHECK_ERRC(load_store(dir / "absent.json"), Errc::io_failure);
    CHECK_ERRC(RetrievalStore::open(dir / "s.json", "other"), Errc::corrupt_store);
  }

  TEST_CASE("failed persist leaves the store unchanged") {
    TempDir dir;
    auto p = fixture();
    auto store = RetrievalStore::open(dir / "s.json", "s");
    store->ingest_document("a", "first", p);
    // Replace the backing file with a directory so the next rename fails.
    std::filesystem::remove(dir / "s.json");
    std::filesystem::create_directory(dir / "s.json");
    CHECK_ERRC(store->ingest_document("b", "second", p), Errc::io_failure);
    CHECK(store->size() == 1);
    CHECK_FALSE(store->contains_document("b"));
  }
}

TEST_SUITE("catalog") {
  TEST_CASE("open_directory creates the disease stores") {
    TempDir dir;
    auto p = fixture();
    auto catalog = StoreCatalog::open_directory(dir.path(), 8);
    CHECK(catalog.names() == std::vector<std::string>{"covid19", "normal", "pneumonia"});
    CHECK(catalog.ingest_document("covid19", "d", "ground glass", p) == 1);
    CHECK(std::filesystem::exists(dir / "covid19.json"));
    CHECK_ERRC(catalog.get("flu"), Errc::unknown_store);
    auto copy = catalog;
    CHECK(copy.get("covid19")->size() == 1);
    auto reopened = StoreCatalog::open_directory(dir.path(), 8);
    CHECK(reopened.query("covid19", "ground glass", 1, p).at(0).chunk.doc_id == "d");
  }

  TEST_CASE("label to store mapping") {
    CHECK(store_for_label("Pneumonia") == "pneumonia");
    CHECK(store_for_label("COVID-19") == "covid19");
    CHECK(store_for_label("Normal") == "normal");
    CHECK_ERRC(store_for_label("Flu"), Errc::unknown_class_label);
  }
}
