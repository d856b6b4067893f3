#include "cbmrag/agents/prompts.hpp"

#include "cbmrag/error.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::agents {

namespace {

const std::map<std::string, std::string>& builtin_prompts() {
  static const std::map<std::string, std::string> prompts{
      {"pneumonia_agent",
       "You are a pulmonology specialist focused on bacterial and viral pneumonia. Use the "
       "retrieve tool to look up reference material on pneumonia and explain how the "
       "highlighted chest X-ray concepts support or weaken the predicted class."},
      {"covid19_agent",
       "You are a specialist in COVID-19 lung involvement. Use the retrieve tool to look up "
       "reference material on COVID-19 and explain how the highlighted chest X-ray concepts "
       "support or weaken the predicted class."},
      {"normal_agent",
       "You are a thoracic radiology specialist for studies without acute disease. Use the "
       "retrieve tool to look up reference material on normal chest X-ray appearance and "
       "explain whether the highlighted concepts are consistent with a normal study."},
      {"radiologist",
       "You are a senior radiologist. Combine the classifier output, the concept scores and "
       "the specialist assessment into concise, evidence-grounded findings for the report "
       "writer. Do not invent findings that are not supported by the inputs."},
      {"report_writer",
       "You are a radiology report writer. Write a structured chest X-ray report with exactly "
       "three sections, each introduced by its header on its own line: FINDINGS:, DIAGNOSIS:, "
       "GUIDELINES:. Base every statement on the provided findings and context."},
      {"chat_agent",
       "You are an assistant answering a clinician's questions about one chest X-ray case. Use "
       "case_state to read the current prediction, concept scores and report, and retrieve to "
       "consult the knowledge bases. Answer concisely."},
      {"concept_generator",
       "You are a radiologist compiling visual concepts that distinguish the given chest X-ray "
       "classes. List one concept per line in the form: id | name | description. The id is "
       "lowercase letters, digits and underscores; the description is a short phrase "
       "describing how the concept looks on a chest X-ray. Output nothing else."},
  };
  return prompts;
}

}  // namespace

PromptLibrary::PromptLibrary() : prompts_(builtin_prompts()) {}

PromptLibrary PromptLibrary::from_directory(const std::filesystem::path& dir) {
  PromptLibrary lib;
  for (const auto& name : agent_names()) {
    const auto file = dir / (name + ".txt");
    if (std::filesystem::exists(file)) {
      auto text = util::trim(util::read_text_file(file));
      if (!text.empty()) lib.prompts_[name] = std::move(text);
    }
  }
  return lib;
}

const std::string& PromptLibrary::get(const std::string& agent_name) const {
  auto it = prompts_.find(agent_name);
  if (it == prompts_.end()) {
    throw Error(Errc::invalid_argument, "no prompt for agent '" + agent_name + "'");
  }
  return it->second;
}

void PromptLibrary::set(const std::string& agent_name, std::string text) {
  prompts_[agent_name] = std::move(text);
}

const std::vector<std::string>& PromptLibrary::agent_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, _] : builtin_prompts()) out.push_back(name);
    return out;
  }();
  return names;
}

}  // namespace cbmrag::agents
