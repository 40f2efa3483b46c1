#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace specloop {

struct SpecExample {
  std::string input;
  std::string expected;

  bool operator==(const SpecExample&) const = default;
};

/// Problem definition parsed from a TOML document. Immutable after parsing.
///
/// Equality compares the problem content (name, signature, description,
/// constraints, examples); `raw_source`/`source_hash` record where a value
/// came from and differ between a hand-written document and its canonical
/// serialization.
class ProblemSpec {
 public:
  const std::string& function_name() const { return function_name_; }
  const std::string& signature() const { return signature_; }
  const std::string& description() const { return description_; }
  const std::vector<std::string>& constraints() const { return constraints_; }
  const std::vector<SpecExample>& examples() const { return examples_; }
  const std::string& raw_source() const { return raw_source_; }
  const std::string& source_hash() const { return source_hash_; }
  /// Unknown keys and similar non-fatal findings.
  const std::vector<std::string>& warnings() const { return warnings_; }

  bool operator==(const ProblemSpec& other) const {
    return function_name_ == other.function_name_ && signature_ == other.signature_ &&
           description_ == other.description_ && constraints_ == other.constraints_ &&
           examples_ == other.examples_;
  }

 private:
  friend ProblemSpec parse_spec(std::string_view document);

  std::string function_name_;
  std::string signature_;
  std::string description_;
  std::vector<std::string> constraints_;
  std::vector<SpecExample> examples_;
  std::string raw_source_;
  std::string source_hash_;
  std::vector<std::string> warnings_;
};

/// Errors: Error{parse} (TOML syntax, with line/column) or Error{validation}
/// naming the missing or mistyped key.
ProblemSpec parse_spec(std::string_view document);

/// Canonical TOML form; parse_spec(serialize_spec(s)) == s.
std::string serialize_spec(const ProblemSpec& spec);

/// Prompt-ready text. Pure function of the spec content.
std::string render_for_prompt(const ProblemSpec& spec);

/// Whether `name` is a valid identifier (letters, digits, underscore; no leading digit).
bool is_identifier(std::string_view name);

}  // namespace specloop
