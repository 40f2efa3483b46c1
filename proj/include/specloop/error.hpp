#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace specloop {

enum class ErrorKind {
  parse,
  validation,
  integrity,
  configuration,
  not_found,
  precondition,
  budget_expired,
  debounced,
  busy,
  rejected,
  transport,
  protocol,
  fixture_miss,
  extraction,
  environment,
  harness,
  storage,
  domain,
  usage,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` carries the category the
/// service and CLI map onto status codes. `detail()` holds bulky context
/// (raw LLM output, runner stderr) kept out of the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string detail = {})
      : std::runtime_error(message), kind_(kind), detail_(std::move(detail)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace specloop
