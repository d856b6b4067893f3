#include "cbmrag/agents/concept_generation.hpp"

#include <regex>
#include <set>
#include <sstream>

#include "cbmrag/error.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::agents {

std::vector<cbm::Concept> parse_concept_lines(const std::string& reply) {
  static const std::regex kId("[a-z0-9_]+");
  std::vector<cbm::Concept> out;
  std::set<std::string> seen;
  std::istringstream in(reply);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::size_t from = 0;
    for (;;) {
      const auto bar = line.find('|', from);
      fields.push_back(util::trim(line.substr(from, bar - from)));
      if (bar == std::string::npos) break;
      from = bar + 1;
    }
    if (fields.size() != 3 || !std::regex_match(fields[0], kId) || fields[1].empty() ||
        fields[2].empty()) {
      continue;
    }
    if (!seen.insert(fields[0]).second) continue;
    out.push_back({fields[0], fields[1], fields[2]});
  }
  return out;
}

cbm::ConceptSet generate_concept_set(const std::vector<std::string>& class_labels,
                                     providers::ChatModel& model, const PromptLibrary& prompts,
                                     const cbm::ConceptSet& fallback) {
  if (class_labels.empty()) throw Error(Errc::invalid_argument, "no class labels given");
  std::string labels;
  for (const auto& l : class_labels) labels += (labels.empty() ? "" : ", ") + l;

  const std::vector<providers::ChatMessage> messages{
      {providers::Role::system, prompts.get("concept_generator")},
      {providers::Role::user,
       "Classes: " + labels +
           "\nList 15 to 25 clinical concepts visible on chest X-rays that help tell these "
           "classes apart."}};
  const auto reply = model.complete(messages, 0.0, 2048);
  auto concepts = parse_concept_lines(reply);
  if (concepts.size() < kMinGeneratedConcepts) return fallback;

  std::string canonical;
  for (const auto& c : concepts) canonical += c.concept_id + "|" + c.name + "|" + c.prompt_text + "\n";
  const auto digest = util::sha256(util::as_bytes(canonical));
  cbm::ConceptSet set{"generated-" + util::to_hex(digest).substr(0, 12), std::move(concepts)};
  validate(set);
  return set;
}

}  // namespace cbmrag::agents
