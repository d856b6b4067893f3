#include "cbmrag/agents/chat.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "cbmrag/error.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::agents {

using providers::ChatMessage;
using providers::Role;

namespace {

struct StoreHit {
  std::string store;
  retrieval::RetrievalHit hit;
};

std::string search_all(const retrieval::StoreCatalog& catalog, const std::string& query,
                       std::size_t k, providers::TextEmbedder& embedder) {
  if (util::trim(query).empty()) return "error: empty query";
  std::vector<StoreHit> merged;
  for (const auto& name : catalog.names()) {
    for (auto& h : catalog.get(name)->query(query, k, embedder)) merged.push_back({name, std::move(h)});
  }
  std::stable_sort(merged.begin(), merged.end(), [](const StoreHit& a, const StoreHit& b) {
    if (a.hit.score != b.hit.score) return a.hit.score > b.hit.score;
    if (a.store != b.store) return a.store < b.store;
    if (a.hit.chunk.doc_id != b.hit.chunk.doc_id) return a.hit.chunk.doc_id < b.hit.chunk.doc_id;
    return a.hit.chunk.chunk_index < b.hit.chunk.chunk_index;
  });
  if (merged.size() > k) merged.resize(k);
  if (merged.empty()) return "No matching passages.";
  std::ostringstream out;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    char score[32];
    std::snprintf(score, sizeof score, "%.4f", merged[i].hit.score);
    out << "[" << i + 1 << "] " << merged[i].store << "/" << merged[i].hit.chunk.doc_id << "#"
        << merged[i].hit.chunk.chunk_index << " (score " << score
        << "): " << merged[i].hit.chunk.text;
    if (i + 1 < merged.size()) out << "\n";
  }
  return out.str();
}

}  // namespace

ChatResult chat(const std::string& case_state, const std::string& message,
                std::vector<ChatMessage> history, const retrieval::StoreCatalog& catalog,
                providers::TextEmbedder& embedder, providers::ChatModel& model,
                const PromptLibrary& prompts, const ChatOptions& options) {
  if (util::trim(message).empty()) throw Error(Errc::invalid_argument, "chat message is empty");

  AgentSpec agent;
  agent.name = "chat_agent";
  agent.role_prompt = prompts.get("chat_agent");
  agent.max_iterations = options.max_iterations;
  agent.temperature = options.temperature;
  agent.max_tokens = options.max_tokens;
  const auto k = options.retrieval_k;
  agent.tools.push_back({"retrieve", "Search every knowledge base. Input: a short search query.",
                         [&catalog, &embedder, k](const std::string& q) {
                           return search_all(catalog, q, k, embedder);
                         }});
  agent.tools.push_back({"case_state",
                         "Read the current case: predicted class, concept scores and report. "
                         "Input is ignored.",
                         [&case_state](const std::string&) { return case_state; }});

  const auto keep = std::min(options.history_turns, history.size());
  const std::vector<ChatMessage> context(history.end() - static_cast<std::ptrdiff_t>(keep),
                                         history.end());

  ChatResult result;
  result.prompt = initial_messages(agent, message, context);
  auto run = run_react(agent, message, model, context);
  result.reply = run.final_answer;
  result.trace = std::move(run.trace);
  history.push_back({Role::user, message});
  history.push_back({Role::assistant, result.reply});
  result.history = std::move(history);
  return result;
}

}  // namespace cbmrag::agents
