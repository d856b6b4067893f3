#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cbmrag::agents {

// Role prompts keyed by agent name. Built-in defaults can be overridden by
// <dir>/<name>.txt files so prompts are editable without a rebuild.
class PromptLibrary {
 public:
  PromptLibrary();  // built-in defaults only

  // Loads overrides from `dir`. Missing files keep the built-in text.
  static PromptLibrary from_directory(const std::filesystem::path& dir);

  // Errors: invalid_argument for an unknown agent name.
  const std::string& get(const std::string& agent_name) const;
  void set(const std::string& agent_name, std::string text);

  static const std::vector<std::string>& agent_names();

 private:
  std::map<std::string, std::string> prompts_;
};

}  // namespace cbmrag::agents
