#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbmrag/providers/provider.hpp"

namespace cbmrag::agents {

struct ToolDescriptor {
  std::string name;  // [a-z_]+
  std::string description;
  std::function<std::string(const std::string&)> handler;
};

struct AgentSpec {
  std::string name;
  std::string role_prompt;
  std::vector<ToolDescriptor> tools;
  int max_iterations = 8;
  double temperature = 0.0;
  int max_tokens = 1024;
};

// Throws Error(invalid_argument) for bad tool names, duplicates, or a
// non-positive iteration cap.
void validate(const AgentSpec& spec);

struct ReActStep {
  std::string thought;
  std::optional<std::string> action;
  std::optional<std::string> action_input;
  std::optional<std::string> observation;

  bool operator==(const ReActStep&) const = default;
};

enum class Termination { final_answer, max_iterations, parse_failure };
const char* to_string(Termination t) noexcept;

struct AgentTrace {
  std::string agent_name;
  std::vector<ReActStep> steps;
  std::string final_answer;
  Termination terminated_by = Termination::final_answer;

  bool operator==(const AgentTrace&) const = default;
};

void to_json(nlohmann::json& j, const ReActStep& s);
void from_json(const nlohmann::json& j, ReActStep& s);
void to_json(nlohmann::json& j, const AgentTrace& t);
void from_json(const nlohmann::json& j, AgentTrace& t);

struct ParsedStep {
  std::string thought;
  std::string action;
  std::string action_input;

  bool operator==(const ParsedStep&) const = default;
};

struct FinalAnswer {
  std::string text;

  bool operator==(const FinalAnswer&) const = default;
};

using ParsedOutput = std::variant<ParsedStep, FinalAnswer>;

// Grammar: markers at the start of a line (leading blanks allowed):
//   "Final Answer:" wins whenever present, and takes the rest of the reply;
//   otherwise "Thought:", "Action:", "Action Input:" must all appear, in that
//   order. Thought spans until the Action line, Action is single-line, and
//   Action Input runs until an optional "Observation:" line.
// Errors: parse_failure.
ParsedOutput parse_react_output(const std::string& text);

struct ReActResult {
  std::string final_answer;
  AgentTrace trace;
};

// Prompt sent on the first call: system (role, tools, format), the optional
// context messages, then the task.
std::vector<providers::ChatMessage> initial_messages(
    const AgentSpec& agent, const std::string& task,
    const std::vector<providers::ChatMessage>& context = {});

// Thought/Action/Observation loop. A reply that cannot be parsed is answered
// once with a correction message; a second unparsable reply ends the run with
// terminated_by = parse_failure. At most max_iterations calls plus that single
// re-prompt are made. Unknown tools produce the observation
// "error: unknown tool <name>". Provider errors propagate.
ReActResult run_react(const AgentSpec& agent, const std::string& task,
                      providers::ChatModel& model,
                      const std::vector<providers::ChatMessage>& context = {});

}  // namespace cbmrag::agents
