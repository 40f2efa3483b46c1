#include "specloop/spec_model.hpp"

#include <array>

#include "specloop/error.hpp"
#include "specloop/hashing.hpp"
#include "specloop/toml.hpp"

namespace specloop {

namespace {

constexpr std::array<std::string_view, 5> kKnownKeys = {"function_name", "signature", "description",
                                                         "constraints", "examples"};

const std::string& required_string(const toml::Table& root, std::string_view key) {
  auto it = root.find(key);
  if (it == root.end()) {
    throw Error(ErrorKind::validation, "specification is missing required key '" + std::string(key) + "'");
  }
  if (!it->second.is_string()) {
    throw Error(ErrorKind::validation, "specification key '" + std::string(key) + "' must be a string, got " +
                                           std::string(it->second.type_name()));
  }
  if (it->second.as_string().find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorKind::validation, "specification key '" + std::string(key) + "' must not be empty");
  }
  return it->second.as_string();
}

}  // namespace

bool is_identifier(std::string_view name) {
  if (name.empty() || (name[0] >= '0' && name[0] <= '9')) return false;
  for (char c : name) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return true;
}

ProblemSpec parse_spec(std::string_view document) {
  if (document.empty()) throw Error(ErrorKind::validation, "specification document is empty");
  toml::Table root = toml::parse(document);

  ProblemSpec spec;
  spec.function_name_ = required_string(root, "function_name");
  spec.signature_ = required_string(root, "signature");
  spec.description_ = required_string(root, "description");
  if (!is_identifier(spec.function_name_)) {
    throw Error(ErrorKind::validation,
                "specification key 'function_name' is not an identifier: '" + spec.function_name_ + "'");
  }

  if (auto it = root.find("constraints"); it != root.end()) {
    if (!it->second.is_array()) throw Error(ErrorKind::validation, "'constraints' must be an array of strings");
    for (const auto& v : it->second.as_array()) {
      if (!v.is_string()) throw Error(ErrorKind::validation, "'constraints' must be an array of strings");
      spec.constraints_.push_back(v.as_string());
    }
  }
  if (auto it = root.find("examples"); it != root.end()) {
    if (!it->second.is_array()) throw Error(ErrorKind::validation, "'examples' must be an array of tables");
    size_t index = 0;
    for (const auto& v : it->second.as_array()) {
      if (!v.is_table()) throw Error(ErrorKind::validation, "'examples' must be an array of tables");
      const auto& t = v.as_table();
      auto in = t.find("input");
      auto ex = t.find("expected");
      if (in == t.end() || !in->second.is_string() || ex == t.end() || !ex->second.is_string()) {
        throw Error(ErrorKind::validation, "examples[" + std::to_string(index) +
                                               "] needs string keys 'input' and 'expected'");
      }
      for (const auto& [k, _] : t) {
        if (k != "input" && k != "expected") {
          spec.warnings_.push_back("unknown key 'examples[" + std::to_string(index) + "]." + k + "'");
        }
      }
      spec.examples_.push_back({in->second.as_string(), ex->second.as_string()});
      ++index;
    }
  }
  for (const auto& [k, _] : root) {
    bool known = false;
    for (auto kk : kKnownKeys) known = known || k == kk;
    if (!known) spec.warnings_.push_back("unknown key '" + k + "'");
  }
  spec.raw_source_ = std::string(document);
  spec.source_hash_ = sha256_hex(document);
  return spec;
}

std::string serialize_spec(const ProblemSpec& spec) {
  std::string out;
  out += "function_name = " + toml::quote(spec.function_name()) + "\n";
  out += "signature = " + toml::quote(spec.signature()) + "\n";
  out += "description = " + toml::quote_block(spec.description()) + "\n";
  if (!spec.constraints().empty()) {
    out += "constraints = [\n";
    for (const auto& c : spec.constraints()) out += "  " + toml::quote(c) + ",\n";
    out += "]\n";
  }
  for (const auto& ex : spec.examples()) {
    out += "\n[[examples]]\n";
    out += "input = " + toml::quote(ex.input) + "\n";
    out += "expected = " + toml::quote(ex.expected) + "\n";
  }
  return out;
}

std::string render_for_prompt(const ProblemSpec& spec) {
  std::string out;
  out += "Function name: " + spec.function_name() + "\n";
  out += "Signature: " + spec.signature() + "\n\n";
  out += "Description:\n" + spec.description();
  if (out.back() != '\n') out.push_back('\n');
  if (!spec.constraints().empty()) {
    out += "\nConstraints:\n";
    for (const auto& c : spec.constraints()) out += "- " + c + "\n";
  }
  if (!spec.examples().empty()) {
    out += "\nExamples:\n";
    for (const auto& ex : spec.examples()) {
      out += "- input: " + ex.input + "\n  expected: " + ex.expected + "\n";
    }
  }
  return out;
}

}  // namespace specloop
