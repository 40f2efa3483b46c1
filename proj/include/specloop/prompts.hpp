#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "specloop/llm_gateway.hpp"

namespace specloop {

/// One template per generation kind, with `{{name}}` placeholders.
class PromptTemplates {
 public:
  /// Templates compiled into the binary (the files under prompts/).
  static PromptTemplates builtin();
  /// `<dir>/<kind>.txt` for every kind; missing files fall back to builtin.
  static PromptTemplates from_directory(const std::filesystem::path& dir);

  /// Placeholders without a value in `vars` are left verbatim.
  std::string render(GenerationKind kind, const std::map<std::string, std::string>& vars) const;

  const std::string& text(GenerationKind kind) const;
  /// kind -> SHA-256 of the template text.
  std::map<std::string, std::string> hashes() const;

 private:
  std::map<GenerationKind, std::string> templates_;
};

}  // namespace specloop
