#pragma once

#include <string>
#include <vector>

#include "cbmrag/agents/prompts.hpp"
#include "cbmrag/agents/react.hpp"
#include "cbmrag/retrieval/store.hpp"

namespace cbmrag::agents {

struct ChatOptions {
  std::size_t history_turns = 20;
  std::size_t retrieval_k = 4;
  int max_iterations = 8;
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct ChatResult {
  std::string reply;
  std::vector<providers::ChatMessage> history;  // input history + user turn + reply
  AgentTrace trace;
  std::vector<providers::ChatMessage> prompt;   // first prompt sent to the model
};

// Runs the chat agent. Its tools are "retrieve" (all stores in `catalog`,
// merged by score) and "case_state" (returns `case_state` verbatim). Only the
// most recent `history_turns` history entries are placed in the prompt.
// Errors: invalid_argument (blank message), provider errors.
ChatResult chat(const std::string& case_state, const std::string& message,
                std::vector<providers::ChatMessage> history,
                const retrieval::StoreCatalog& catalog, providers::TextEmbedder& embedder,
                providers::ChatModel& model, const PromptLibrary& prompts,
                const ChatOptions& options = {});

}  // namespace cbmrag::agents
