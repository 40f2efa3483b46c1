#include "specloop/prompts.hpp"

#include "specloop/error.hpp"
#include "specloop/hashing.hpp"
#include "specloop/telemetry.hpp"

namespace specloop {

namespace embedded {
std::string_view prompt_template(std::string_view kind);
}

namespace {

constexpr GenerationKind kAllKinds[] = {GenerationKind::suite,    GenerationKind::single_test,
                                        GenerationKind::explain_test, GenerationKind::function,
                                        GenerationKind::regenerate_function, GenerationKind::advice};

}  // namespace

PromptTemplates PromptTemplates::builtin() {
  PromptTemplates t;
  for (auto kind : kAllKinds) t.templates_[kind] = std::string(embedded::prompt_template(to_string(kind)));
  return t;
}

PromptTemplates PromptTemplates::from_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::configuration, "prompt directory '" + dir.string() + "' does not exist");
  }
  auto t = builtin();
  for (auto kind : kAllKinds) {
    auto file = dir / (std::string(to_string(kind)) + ".txt");
    if (std::filesystem::exists(file)) t.templates_[kind] = read_text_file(file);
  }
  return t;
}

std::string PromptTemplates::render(GenerationKind kind, const std::map<std::string, std::string>& vars) const {
  const std::string& tmpl = text(kind);
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    auto open = tmpl.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    auto close = tmpl.find("}}", open + 2);
    if (close == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    out.append(tmpl, pos, open - pos);
    std::string name = tmpl.substr(open + 2, close - open - 2);
    if (auto it = vars.find(name); it != vars.end()) {
      out += it->second;
    } else {
      out.append(tmpl, open, close + 2 - open);
    }
    pos = close + 2;
  }
  return out;
}

const std::string& PromptTemplates::text(GenerationKind kind) const { return templates_.at(kind); }

std::map<std::string, std::string> PromptTemplates::hashes() const {
  std::map<std::string, std::string> out;
  for (const auto& [kind, text] : templates_) out[std::string(to_string(kind))] = sha256_hex(text);
  return out;
}

}  // namespace specloop
