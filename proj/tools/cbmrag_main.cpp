// cbmrag: batch and operational entry points.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation failure.
// Machine-readable results go to stdout, progress and errors to stderr.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cbmrag/agents/concept_generation.hpp"
#include "cbmrag/agents/pipeline.hpp"
#include "cbmrag/cbm/serialization.hpp"
#include "cbmrag/error.hpp"
#include "cbmrag/retrieval/store.hpp"
#include "cbmrag/service/analysis.hpp"
#include "cbmrag/service/config.hpp"
#include "cbmrag/service/http_server.hpp"
#include "cbmrag/service/service.hpp"
#include "cbmrag/util.hpp"

namespace fs = std::filesystem;
using cbmrag::Errc;
using cbmrag::Error;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Input validation failure: reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

cbmrag::service::Config load_config_or_default(const std::string& path) {
  if (path.empty()) return cbmrag::service::default_config(fs::current_path());
  return cbmrag::service::load_config(path);
}

std::string image_media_type(const fs::path& path) {
  auto type = cbmrag::service::media_type_from_filename(path.filename().string());
  if (!cbmrag::providers::is_image_media_type(type)) {
    throw UsageError("unsupported image type: " + path.string());
  }
  return type;
}

// ---- ingest ----------------------------------------------------------------

struct IngestArgs {
  std::string corpus;
  std::string store_dir;
  std::string config;
};

int cmd_ingest(const IngestArgs& args) {
  const fs::path corpus(args.corpus);
  for (const auto& name : cbmrag::retrieval::disease_store_names()) {
    if (!fs::is_directory(corpus / name)) {
      throw UsageError("missing corpus subdirectory: " + (corpus / name).string());
    }
  }
  const auto config = load_config_or_default(args.config);
  auto providers = cbmrag::service::make_providers(config.providers);
  const fs::path out_dir =
      args.store_dir.empty() ? config.store_dir : fs::path(args.store_dir);

  json counts = json::object();
  for (const auto& name : cbmrag::retrieval::disease_store_names()) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(corpus / name)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    cbmrag::retrieval::RetrievalStore store(name, providers.text->dimension());
    for (const auto& file : files) {
      try {
        store.ingest_document(file.filename().string(), cbmrag::util::read_text_file(file),
                              *providers.text, config.chunking);
      } catch (const Error& e) {
        throw Error(e.code(), file.string() + ": " + e.what());
      }
    }
    store.persist(out_dir / (name + ".json"));
    std::fprintf(stderr, "%s: %zu documents, %zu chunks\n", name.c_str(), files.size(),
                 store.size());
    counts[name] = store.size();
  }
  std::cout << json{{"store_dir", out_dir.string()}, {"chunks", counts}}.dump(2) << "\n";
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string concepts;
  std::string model_out;
  std::string config;
  std::uint64_t seed = 0;
  int epochs = 500;
  double learning_rate = 0.1;
  double l2 = 1e-4;
  bool shuffle = false;
  unsigned workers = 4;
};

struct ManifestRow {
  std::size_t line = 0;
  fs::path path;
  std::string label;
};

std::vector<ManifestRow> read_manifest(const fs::path& manifest,
                                       const std::vector<std::string>& labels) {
  std::istringstream in(cbmrag::util::read_text_file(manifest));
  std::string line;
  std::size_t line_no = 0;
  std::vector<ManifestRow> rows;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = cbmrag::util::trim(line);
    if (text.empty()) continue;
    if (!header_seen) {
      if (text != "path,label") {
        throw UsageError(manifest.string() + ": header must be \"path,label\"");
      }
      header_seen = true;
      continue;
    }
    const auto comma = text.rfind(',');
    if (comma == std::string::npos) {
      throw UsageError(manifest.string() + ":" + std::to_string(line_no) + ": expected path,label");
    }
    ManifestRow row{line_no, cbmrag::util::trim(text.substr(0, comma)),
                    cbmrag::util::trim(text.substr(comma + 1))};
    if (std::find(labels.begin(), labels.end(), row.label) == labels.end()) {
      throw UsageError(manifest.string() + ":" + std::to_string(line_no) + ": unknown label \"" +
                       row.label + "\"");
    }
    if (row.path.is_relative()) row.path = manifest.parent_path() / row.path;
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw UsageError(manifest.string() + ": header must be \"path,label\"");
  if (rows.empty()) throw UsageError("empty dataset: " + manifest.string());
  return rows;
}

int cmd_train(const TrainArgs& args) {
  const auto labels = cbmrag::cbm::default_class_labels();
  const fs::path manifest(args.manifest);
  const auto rows = read_manifest(manifest, labels);

  // Read every image up front so an unreadable row is a usage error.
  std::vector<cbmrag::util::Bytes> images;
  std::vector<std::string> media_types;
  for (const auto& row : rows) {
    try {
      images.push_back(cbmrag::util::read_binary_file(row.path));
    } catch (const Error&) {
      throw UsageError(manifest.string() + ":" + std::to_string(row.line) +
                       ": cannot read image " + row.path.string());
    }
    media_types.push_back(image_media_type(row.path));
  }

  const auto config = load_config_or_default(args.config);
  auto providers = cbmrag::service::make_providers(config.providers);
  const auto concepts = cbmrag::cbm::load_concept_set(
      args.concepts.empty() ? config.concepts : fs::path(args.concepts));
  const auto embeddings =
      cbmrag::cbm::embed_concepts(concepts, *providers.text, providers.projection);

  // Bounded worker pool; results land in manifest order.
  std::vector<std::optional<cbmrag::cbm::LabeledSample>> samples(rows.size());
  std::vector<std::exception_ptr> errors(rows.size());
  std::atomic<std::size_t> next{0};
  const unsigned workers = std::max(1u, std::min<unsigned>(args.workers, rows.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < rows.size(); i = next++) {
        try {
          auto extracted = cbmrag::service::extract_concepts(images[i], media_types[i],
                                                             *providers.image, embeddings);
          samples[i] = cbmrag::cbm::LabeledSample{std::move(extracted.concept_vector),
                                                  rows[i].label};
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  std::vector<cbmrag::cbm::LabeledSample> data;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const Error& e) {
        throw Error(e.code(), manifest.string() + ":" + std::to_string(rows[i].line) + ": " +
                                  e.what());
      }
    }
    data.push_back(std::move(*samples[i]));
  }

  cbmrag::cbm::TrainingOptions options;
  options.seed = args.seed;
  options.epochs = args.epochs;
  options.learning_rate = args.learning_rate;
  options.l2_weight = args.l2;
  options.shuffle = args.shuffle;
  const auto model = cbmrag::cbm::train(data, labels, options);
  cbmrag::cbm::save_classifier(model, args.model_out);
  const auto metrics = cbmrag::cbm::evaluate(model, data);

  std::fprintf(stderr, "trained on %zu samples, accuracy %.4f\n", data.size(), metrics.accuracy);
  std::fprintf(stderr, "confusion (rows = truth, cols = predicted):\n");
  for (std::size_t k = 0; k < labels.size(); ++k) {
    std::fprintf(stderr, "  %-10s", labels[k].c_str());
    for (auto n : metrics.confusion[k]) std::fprintf(stderr, " %4zu", n);
    std::fprintf(stderr, "\n");
  }
  std::cout << json{{"model", args.model_out},
                    {"concept_set_id", concepts.id},
                    {"samples", data.size()},
                    {"class_labels", metrics.class_labels},
                    {"accuracy", metrics.accuracy},
                    {"precision", metrics.precision},
                    {"recall", metrics.recall},
                    {"confusion", metrics.confusion}}
                   .dump(2)
            << "\n";
  return kExitOk;
}

// ---- run -------------------------------------------------------------------

struct RunArgs {
  std::string image;
  std::string model;
  std::string store_dir;
  std::string config;
  std::string concepts;
  std::optional<std::size_t> k;
  bool no_report = false;
  std::optional<std::int64_t> epoch_seconds;
};

int cmd_run(const RunArgs& args) {
  auto config = load_config_or_default(args.config);
  if (!args.model.empty()) config.model = args.model;
  if (!args.store_dir.empty()) config.store_dir = args.store_dir;
  if (!args.concepts.empty()) config.concepts = args.concepts;
  if (args.k) config.pipeline.retrieval_k = *args.k;

  const fs::path image_path(args.image);
  const auto media_type = cbmrag::service::media_type_from_filename(image_path.filename().string());
  const auto image = cbmrag::util::read_binary_file(image_path);
  auto providers = cbmrag::service::make_providers(config.providers);
  const auto model = cbmrag::service::ConceptModel::build(
      cbmrag::cbm::load_concept_set(config.concepts), cbmrag::cbm::load_classifier(config.model),
      *providers.text, providers.projection);

  const auto extracted =
      cbmrag::service::extract_concepts(image, media_type, *providers.image, model.embeddings);
  const auto prediction = cbmrag::cbm::classify(model.classifier, extracted.concept_vector);
  const auto contrib = cbmrag::cbm::contributions(model.classifier, extracted.concept_vector,
                                                  prediction.predicted_label);

  json out{{"image", image_path.filename().string()},
           {"concept_set_id", model.concepts.id},
           {"prediction", cbmrag::service::prediction_json(prediction, model.classifier)},
           {"concepts", cbmrag::service::concept_rows(model.concepts, extracted.concept_vector,
                                                      contrib)}};
  if (!args.no_report) {
    const auto catalog = cbmrag::retrieval::StoreCatalog::open_directory(
        config.store_dir, providers.text->dimension());
    const auto prompts = fs::is_directory(config.prompts_dir)
                             ? cbmrag::agents::PromptLibrary::from_directory(config.prompts_dir)
                             : cbmrag::agents::PromptLibrary{};
    const cbmrag::agents::CaseFindings findings{prediction, contrib, model.concepts,
                                                extracted.concept_vector, {}};
    auto consult = cbmrag::agents::radiologist_consult(findings, catalog, *providers.text,
                                                       *providers.chat, prompts, config.pipeline);
    const auto now = args.epoch_seconds
                         ? std::chrono::system_clock::time_point(
                               std::chrono::seconds(*args.epoch_seconds))
                         : std::chrono::system_clock::now();
    out["report"] = cbmrag::agents::write_report(consult.consolidated_findings, prediction, {},
                                                 *providers.chat, prompts, config.pipeline,
                                                 std::move(consult.traces), now);
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

// ---- embed-concepts / generate-concepts ------------------------------------

struct EmbedArgs {
  std::string concepts;
  std::string out;
  std::string config;
};

int cmd_embed_concepts(const EmbedArgs& args) {
  const auto config = load_config_or_default(args.config);
  auto providers = cbmrag::service::make_providers(config.providers);
  const auto set = cbmrag::cbm::load_concept_set(
      args.concepts.empty() ? config.concepts : fs::path(args.concepts));
  const auto e = cbmrag::cbm::embed_concepts(set, *providers.text, providers.projection);
  cbmrag::cbm::save_concept_embeddings(e, args.out);
  std::cout << json{{"concept_set_id", e.concept_set_id},
                    {"concepts", e.matrix.rows()},
                    {"dim", e.matrix.cols()},
                    {"out", args.out}}
                   .dump(2)
            << "\n";
  return kExitOk;
}

struct GenerateArgs {
  std::string fallback;
  std::string out;
  std::string config;
};

int cmd_generate_concepts(const GenerateArgs& args) {
  const auto config = load_config_or_default(args.config);
  auto providers = cbmrag::service::make_providers(config.providers);
  const auto fallback = cbmrag::cbm::load_concept_set(
      args.fallback.empty() ? config.concepts : fs::path(args.fallback));
  const auto prompts = fs::is_directory(config.prompts_dir)
                           ? cbmrag::agents::PromptLibrary::from_directory(config.prompts_dir)
                           : cbmrag::agents::PromptLibrary{};
  const auto set = cbmrag::agents::generate_concept_set(cbmrag::cbm::default_class_labels(),
                                                        *providers.chat, prompts, fallback);
  cbmrag::cbm::save_concept_set(set, args.out);
  std::cout << json{{"concept_set_id", set.id},
                    {"concepts", set.concepts.size()},
                    {"fallback_used", set.id == fallback.id},
                    {"out", args.out}}
                   .dump(2)
            << "\n";
  return kExitOk;
}

// ---- serve -----------------------------------------------------------------

struct ServeArgs {
  std::string config;
  bool log_requests = false;
};

int cmd_serve(const ServeArgs& args) {
  // Block the shutdown signals before any thread starts so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGUSR1);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const auto config = load_config_or_default(args.config);
  auto service = cbmrag::service::Service::from_config(config);
  cbmrag::service::HttpServer server(*service, args.log_requests);
  const int port = server.bind(config.host, config.port);
  std::fprintf(stderr, "listening on %s:%d (%zu sessions loaded)\n", config.host.c_str(), port,
               service->sessions().size());

  std::thread worker([&server] {
    server.serve();
    kill(getpid(), SIGUSR1);
  });
  int sig = 0;
  sigwait(&signals, &sig);
  if (sig != SIGUSR1) {
    std::fprintf(stderr, "received signal %d, draining\n", sig);
    server.stop();
  }
  worker.join();
  std::fprintf(stderr, "stopped\n");
  return kExitOk;
}

void print_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"code", code}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cbmrag: concept bottleneck analysis with retrieval-augmented reporting"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Build the disease stores from a text corpus");
  ingest_cmd->add_option("--corpus", ingest.corpus, "Directory with pneumonia/, covid19/, normal/")
      ->required();
  ingest_cmd->add_option("--store-dir", ingest.store_dir, "Output directory for store files");
  ingest_cmd->add_option("--config", ingest.config, "TOML config file");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the classifier from an image manifest");
  train_cmd->add_option("--manifest", train.manifest, "CSV with header path,label")->required();
  train_cmd->add_option("--concepts", train.concepts, "Concept set JSON");
  train_cmd->add_option("--model", train.model_out, "Output classifier JSON")->required();
  train_cmd->add_option("--config", train.config, "TOML config file");
  train_cmd->add_option("--seed", train.seed, "Seed for --shuffle");
  train_cmd->add_option("--epochs", train.epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train.learning_rate)->check(CLI::PositiveNumber);
  train_cmd->add_option("--l2", train.l2)->check(CLI::NonNegativeNumber);
  train_cmd->add_flag("--shuffle", train.shuffle, "Permute sample order before training");
  train_cmd->add_option("--workers", train.workers, "Concurrent image embeddings")
      ->check(CLI::Range(1u, 64u));

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run the full pipeline on one image");
  run_cmd->add_option("--image", run.image)->required();
  run_cmd->add_option("--model", run.model, "Classifier JSON");
  run_cmd->add_option("--store-dir", run.store_dir, "Directory with the disease stores");
  run_cmd->add_option("--config", run.config, "TOML config file");
  run_cmd->add_option("--concepts", run.concepts, "Concept set JSON");
  run_cmd->add_option("--k", run.k, "Retrieval depth")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--no-report", run.no_report, "Skip the agents and the report");
  run_cmd->add_option("--epoch-seconds", run.epoch_seconds, "Fixed report timestamp");

  EmbedArgs embed;
  auto* embed_cmd = app.add_subcommand("embed-concepts", "Embed a concept set");
  embed_cmd->add_option("--concepts", embed.concepts, "Concept set JSON");
  embed_cmd->add_option("--out", embed.out)->required();
  embed_cmd->add_option("--config", embed.config, "TOML config file");

  GenerateArgs generate;
  auto* generate_cmd =
      app.add_subcommand("generate-concepts", "Ask the completion model for a concept set");
  generate_cmd->add_option("--fallback", generate.fallback, "Curated concept set JSON");
  generate_cmd->add_option("--out", generate.out)->required();
  generate_cmd->add_option("--config", generate.config, "TOML config file");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the REST API");
  serve_cmd->add_option("--config", serve.config, "TOML config file");
  serve_cmd->add_flag("--log-requests", serve.log_requests);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(ingest);
    if (*train_cmd) return cmd_train(train);
    if (*run_cmd) return cmd_run(run);
    if (*embed_cmd) return cmd_embed_concepts(embed);
    if (*generate_cmd) return cmd_generate_concepts(generate);
    if (*serve_cmd) return cmd_serve(serve);
  } catch (const UsageError& e) {
    print_error("usage", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    print_error(std::string(cbmrag::to_string(e.code())), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    print_error("internal_error", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
