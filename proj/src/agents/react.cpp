#include "cbmrag/agents/react.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

#include "cbmrag/error.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::agents {

using providers::ChatMessage;
using providers::Role;

const char* to_string(Termination t) noexcept {
  switch (t) {
    case Termination::final_answer: return "final_answer";
    case Termination::max_iterations: return "max_iterations";
    case Termination::parse_failure: return "parse_failure";
  }
  return "final_answer";
}

void validate(const AgentSpec& spec) {
  static const std::regex kToolName("[a-z_]+");
  if (spec.max_iterations < 1) {
    throw Error(Errc::invalid_argument, "agent '" + spec.name + "': max_iterations must be >= 1");
  }
  std::set<std::string> names;
  for (const auto& tool : spec.tools) {
    if (!std::regex_match(tool.name, kToolName)) {
      throw Error(Errc::invalid_argument, "invalid tool name '" + tool.name + "'");
    }
    if (!names.insert(tool.name).second) {
      throw Error(Errc::invalid_argument, "duplicate tool name '" + tool.name + "'");
    }
    if (!tool.handler) throw Error(Errc::invalid_argument, "tool '" + tool.name + "' has no handler");
  }
}

void to_json(nlohmann::json& j, const ReActStep& s) {
  const auto opt = [](const std::optional<std::string>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  j = nlohmann::json{{"thought", s.thought},
                     {"action", opt(s.action)},
                     {"action_input", opt(s.action_input)},
                     {"observation", opt(s.observation)}};
}

void from_json(const nlohmann::json& j, ReActStep& s) {
  const auto opt = [&](const char* key) -> std::optional<std::string> {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
  };
  j.at("thought").get_to(s.thought);
  s.action = opt("action");
  s.action_input = opt("action_input");
  s.observation = opt("observation");
}

void to_json(nlohmann::json& j, const AgentTrace& t) {
  j = nlohmann::json{{"agent_name", t.agent_name},
                     {"steps", t.steps},
                     {"final_answer", t.final_answer},
                     {"terminated_by", to_string(t.terminated_by)}};
}

void from_json(const nlohmann::json& j, AgentTrace& t) {
  j.at("agent_name").get_to(t.agent_name);
  j.at("steps").get_to(t.steps);
  j.at("final_answer").get_to(t.final_answer);
  const auto term = j.at("terminated_by").get<std::string>();
  if (term == "final_answer") t.terminated_by = Termination::final_answer;
  else if (term == "max_iterations") t.terminated_by = Termination::max_iterations;
  else if (term == "parse_failure") t.terminated_by = Termination::parse_failure;
  else throw nlohmann::json::other_error::create(501, "unknown terminated_by '" + term + "'", &j);
}

namespace {

struct Line {
  std::string text;  // leading blanks removed
};

std::vector<Line> split_lines(const std::string& text) {
  std::vector<Line> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    lines.push_back({first == std::string::npos ? std::string() : line.substr(first)});
  }
  return lines;
}

bool starts_with(const std::string& s, std::string_view prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

constexpr std::string_view kThought = "Thought:";
constexpr std::string_view kAction = "Action:";
constexpr std::string_view kActionInput = "Action Input:";
constexpr std::string_view kObservation = "Observation:";
constexpr std::string_view kFinalAnswer = "Final Answer:";

// Rest of line `first` after the marker, followed by lines up to `last` (exclusive).
std::string gather(const std::vector<Line>& lines, std::size_t first, std::size_t last,
                   std::string_view marker) {
  std::string out = lines[first].text.substr(marker.size());
  for (std::size_t i = first + 1; i < last; ++i) out += "\n" + lines[i].text;
  return util::trim(out);
}

std::optional<std::size_t> find_marker(const std::vector<Line>& lines, std::size_t from,
                                       std::string_view marker) {
  for (std::size_t i = from; i < lines.size(); ++i) {
    if (starts_with(lines[i].text, marker)) return i;
  }
  return std::nullopt;
}

}  // namespace

ParsedOutput parse_react_output(const std::string& text) {
  const auto lines = split_lines(text);
  if (auto fa = find_marker(lines, 0, kFinalAnswer)) {
    return FinalAnswer{gather(lines, *fa, lines.size(), kFinalAnswer)};
  }
  const auto thought = find_marker(lines, 0, kThought);
  if (!thought) throw Error(Errc::parse_failure, "missing 'Thought:'");
  // "Action Input:" does not start with "Action:", so the two never collide.
  const auto action = find_marker(lines, *thought + 1, kAction);
  if (!action) throw Error(Errc::parse_failure, "missing 'Action:' after 'Thought:'");
  const auto input = find_marker(lines, *action + 1, kActionInput);
  if (!input) throw Error(Errc::parse_failure, "missing 'Action Input:' after 'Action:'");
  const auto obs = find_marker(lines, *input + 1, kObservation);

  ParsedStep step;
  step.thought = gather(lines, *thought, *action, kThought);
  step.action = util::trim(lines[*action].text.substr(kAction.size()));
  step.action_input = gather(lines, *input, obs.value_or(lines.size()), kActionInput);
  if (step.action.empty()) throw Error(Errc::parse_failure, "empty 'Action:'");
  return step;
}

std::vector<ChatMessage> initial_messages(const AgentSpec& agent, const std::string& task,
                                          const std::vector<ChatMessage>& context) {
  std::ostringstream system;
  system << agent.role_prompt << "\n\n";
  if (!agent.tools.empty()) {
    system << "You have access to the following tools:\n";
    for (const auto& tool : agent.tools) system << "- " << tool.name << ": " << tool.description << "\n";
    system << "\nTo use a tool, reply exactly in this format:\n"
           << "Thought: <your reasoning>\n"
           << "Action: <one of:";
    for (const auto& tool : agent.tools) system << " " << tool.name;
    system << ">\n"
           << "Action Input: <input for the tool>\n"
           << "\nYou will then receive an Observation with the tool result.\n";
  }
  system << "When you are ready to answer, reply with:\n"
         << "Final Answer: <your answer>";

  std::vector<ChatMessage> messages;
  messages.push_back({Role::system, system.str()});
  messages.insert(messages.end(), context.begin(), context.end());
  messages.push_back({Role::user, "Task: " + task});
  return messages;
}

ReActResult run_react(const AgentSpec& agent, const std::string& task,
                      providers::ChatModel& model, const std::vector<ChatMessage>& context) {
  validate(agent);
  auto messages = initial_messages(agent, task, context);
  ReActResult result;
  result.trace.agent_name = agent.name;

  const auto call = [&] { return model.complete(messages, agent.temperature, agent.max_tokens); };
  const auto try_parse = [](const std::string& reply) -> std::optional<ParsedOutput> {
    try {
      return parse_react_output(reply);
    } catch (const Error& e) {
      if (e.code() != Errc::parse_failure) throw;
      return std::nullopt;
    }
  };
  const auto finish = [&](std::string answer, Termination how) {
    result.final_answer = std::move(answer);
    result.trace.final_answer = result.final_answer;
    result.trace.terminated_by = how;
    return result;
  };

  bool reprompted = false;
  for (int iteration = 0; iteration < agent.max_iterations; ++iteration) {
    auto reply = call();
    auto parsed = try_parse(reply);
    if (!parsed) {
      if (reprompted) return finish(reply, Termination::parse_failure);
      reprompted = true;
      messages.push_back({Role::assistant, reply});
      messages.push_back(
          {Role::user,
           "Your reply did not follow the required format. Reply either with the three lines "
           "'Thought:', 'Action:', 'Action Input:' or with a single 'Final Answer:' line."});
      reply = call();
      parsed = try_parse(reply);
      if (!parsed) return finish(reply, Termination::parse_failure);
    }

    if (auto* answer = std::get_if<FinalAnswer>(&*parsed)) {
      return finish(answer->text, Termination::final_answer);
    }

    const auto& step = std::get<ParsedStep>(*parsed);
    ReActStep record{step.thought, step.action, step.action_input, std::nullopt};
    const auto tool = std::find_if(agent.tools.begin(), agent.tools.end(),
                                   [&](const ToolDescriptor& t) { return t.name == step.action; });
    if (tool == agent.tools.end()) {
      record.observation = "error: unknown tool " + step.action;
    } else {
      record.observation = tool->handler(step.action_input);
    }
    messages.push_back({Role::assistant, reply});
    messages.push_back({Role::user, "Observation: " + *record.observation});
    result.trace.steps.push_back(std::move(record));
  }

  std::string last_thought =
      result.trace.steps.empty() ? std::string() : result.trace.steps.back().thought;
  return finish(std::move(last_thought), Termination::max_iterations);
}

}  // namespace cbmrag::agents
