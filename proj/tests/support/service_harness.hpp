#pragma once

#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "cbmrag/cbm/serialization.hpp"
#include "cbmrag/providers/fixture.hpp"
#include "cbmrag/service/http_server.hpp"
#include "cbmrag/service/service.hpp"
#include "cbmrag/util.hpp"
#include "support/test_support.hpp"

namespace test_support {

inline std::vector<std::string> script_replies(const std::string& name) {
  return cbmrag::providers::ScriptedChatModel::load_script(data_dir() / "fixtures/scripts" /
                                                           (name + ".json"));
}

inline std::vector<std::string> repeat(const std::vector<std::string>& replies, int times) {
  std::vector<std::string> out;
  for (int i = 0; i < times; ++i) out.insert(out.end(), replies.begin(), replies.end());
  return out;
}

inline cbmrag::util::Bytes demo_image() {
  return cbmrag::util::read_binary_file(data_dir() / "fixtures/images/demo_cxr.png");
}

// Service over the shipped demo data: fixture embeddings (dim 8, 14x14 grid),
// the curated concept set, the demo classifier, the synthetic corpus and a
// scripted chat model. Everything writable lives in a temporary directory.
class ServiceHarness {
 public:
  explicit ServiceHarness(std::vector<std::string> replies = {}) { start(std::move(replies)); }

  // Rebuilds the service over the same directories, as a process restart would.
  void restart(std::vector<std::string> replies = {}) {
    service.reset();
    start(std::move(replies));
  }

  cbmrag::service::Service& operator*() { return *service; }
  cbmrag::service::Service* operator->() { return service.get(); }

  TempDir dir;
  std::shared_ptr<cbmrag::providers::FixtureProvider> fixture;
  std::shared_ptr<cbmrag::providers::ScriptedChatModel> chat;
  std::unique_ptr<cbmrag::service::Service> service;

 private:
  void start(std::vector<std::string> replies) {
    using namespace cbmrag;
    providers::FixtureConfig cfg;
    cfg.transcripts = providers::load_transcripts(data_dir() / "fixtures/transcripts.json");
    fixture = std::make_shared<providers::FixtureProvider>(cfg);
    chat = std::make_shared<providers::ScriptedChatModel>(std::move(replies));
    providers::ProviderSet set;
    set.text = fixture;
    set.image = fixture;
    set.transcriber = fixture;
    set.chat = chat;

    const bool fresh = !std::filesystem::exists(dir / "stores");
    auto catalog = retrieval::StoreCatalog::open_directory(dir / "stores", cfg.dim);
    if (fresh) {
      for (const auto& name : retrieval::disease_store_names()) {
        for (const auto& entry :
             std::filesystem::directory_iterator(data_dir() / "corpus" / name)) {
          catalog.ingest_document(name, entry.path().filename().string(),
                                  util::read_text_file(entry.path()), *fixture);
        }
      }
    }
    auto model = service::ConceptModel::build(
        cbm::load_concept_set(data_dir() / "concepts/curated_default.json"),
        cbm::load_classifier(data_dir() / "models/demo_classifier.json"), *fixture);
    auto sessions = std::make_shared<service::SessionRepository>(dir / "sessions");
    sessions->load_all();
    service = std::make_unique<service::Service>(std::move(set), std::move(catalog),
                                                 std::move(model), agents::PromptLibrary(),
                                                 service::ServiceOptions{}, std::move(sessions));
  }
};

// HttpServer on an ephemeral loopback port, served from its own thread.
class RunningServer {
 public:
  explicit RunningServer(cbmrag::service::Service& service) : server_(service) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.serve(); });
    while (!server_.is_running()) std::this_thread::yield();
  }
  ~RunningServer() {
    server_.stop();
    thread_.join();
  }
  RunningServer(const RunningServer&) = delete;
  RunningServer& operator=(const RunningServer&) = delete;

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(30, 0);
    return c;
  }
  int port() const { return port_; }

 private:
  cbmrag::service::HttpServer server_;
  int port_ = 0;
  std::thread thread_;
};

// Concept ids the demo classifier weighs positively for class `k`.
inline std::vector<std::string> class_concepts(const cbmrag::service::ConceptModel& model,
                                               std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < model.classifier.concepts(); ++j) {
    if (model.classifier.weights(k, j) > 0) out.push_back(model.concepts.concepts[j].concept_id);
  }
  return out;
}

// Overrides that force the prediction to class `k`: its concepts to 1, the rest to 0.
inline std::map<std::string, double> flip_to(const cbmrag::service::ConceptModel& model,
                                             std::size_t k) {
  std::map<std::string, double> out;
  for (const auto& c : model.concepts.concepts) out[c.concept_id] = 0.0;
  for (const auto& id : class_concepts(model, k)) out[id] = 1.0;
  return out;
}

}  // namespace test_support
