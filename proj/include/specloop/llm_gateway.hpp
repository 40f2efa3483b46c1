#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "specloop/telemetry.hpp"
#include "specloop/test_harness.hpp"
#include "specloop/time.hpp"

namespace specloop {

enum class GenerationKind { suite, single_test, explain_test, function, regenerate_function, advice };

std::string_view to_string(GenerationKind k);
GenerationKind parse_generation_kind(std::string_view text);

/// Endpoint parameters, frozen for the lifetime of a session.
struct GenerationParams {
  std::string model_id = "default";
  double temperature = 0.0;
  std::int64_t seed = 0;
  int max_tokens = 2048;

  nlohmann::json to_json() const;
  std::string fingerprint() const;
  bool operator==(const GenerationParams&) const = default;
};

struct GenerationRequest {
  GenerationKind kind = GenerationKind::suite;
  std::string prompt;
  GenerationParams params;

  /// SHA-256 over (kind, prompt, params); replay fixtures are keyed by it.
  std::string fixture_key() const;
};

struct GenerationResult {
  std::string output_text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  Millis latency{0};
  std::string backend_id;

  std::int64_t total_tokens() const { return prompt_tokens + completion_tokens; }
  TokenUsage usage() const { return {prompt_tokens, completion_tokens}; }
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual GenerationResult generate(const GenerationRequest& request) = 0;
  virtual std::string id() const = 0;
};

/// Serves `<dir>/<fixture_key>.json`. A missing fixture is Error{fixture_miss}
/// naming the key.
class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(std::filesystem::path dir);
  GenerationResult generate(const GenerationRequest& request) override;
  std::string id() const override { return "replay"; }

 private:
  std::filesystem::path dir_;
};

/// Scripted responses consumed in order per generation kind; the last
/// response of a kind repeats once the list is exhausted. Used to author
/// replay fixtures and in tests. Token counts default to ceil(bytes / 4).
///
/// Document shape: {"<kind>": [ "text" | {"output_text", "prompt_tokens",
/// "completion_tokens"} , ...], ...}
class CannedBackend final : public Backend {
 public:
  explicit CannedBackend(const nlohmann::json& document);
  static std::shared_ptr<CannedBackend> from_file(const std::filesystem::path& file);

  GenerationResult generate(const GenerationRequest& request) override;
  std::string id() const override { return "canned"; }

 private:
  struct Response {
    std::string text;
    std::optional<std::int64_t> prompt_tokens;
    std::optional<std::int64_t> completion_tokens;
  };
  std::mutex mu_;
  std::map<GenerationKind, std::vector<Response>> responses_;
  std::map<GenerationKind, std::size_t> cursor_;
};

/// Forwards to an inner backend and writes a replay fixture per call.
class RecordingBackend final : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir);
  GenerationResult generate(const GenerationRequest& request) override;
  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<Backend> inner_;
  std::filesystem::path dir_;
};

struct LiveBackendConfig {
  /// Full chat-completions URL, e.g. http://127.0.0.1:8000/v1/chat/completions
  std::string endpoint_url;
  std::string api_key;
  Millis timeout{120'000};
  int max_retries = 3;
  Millis retry_backoff{500};
};

/// OpenAI-compatible chat-completions client. Transport failures and
/// 429/5xx responses are retried up to max_retries, then surfaced as
/// Error{transport}; malformed responses are Error{protocol}.
class LiveBackend final : public Backend {
 public:
  explicit LiveBackend(LiveBackendConfig config);
  GenerationResult generate(const GenerationRequest& request) override;
  std::string id() const override { return "live"; }

 private:
  LiveBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

/// Parses a chat-completions response body. Throws Error{protocol}.
GenerationResult parse_chat_completion(std::string_view body);

/// Writes `<dir>/<fixture_key>.json`. Rewriting a fixture with a different
/// output is Error{integrity}.
void write_fixture(const std::filesystem::path& dir, const GenerationRequest& request,
                   const GenerationResult& result);

/// Binds a backend to frozen parameters and keeps token accounting.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, GenerationParams params);

  GenerationResult generate(GenerationKind kind, std::string prompt);

  const GenerationParams& params() const { return params_; }
  std::string backend_id() const { return backend_->id(); }
  TokenUsage totals() const;
  std::size_t calls() const;

 private:
  std::shared_ptr<Backend> backend_;
  const GenerationParams params_;
  mutable std::mutex mu_;
  TokenUsage totals_;
  std::size_t calls_ = 0;
};

/// Body of the first fenced code block, or nullopt.
std::optional<std::string> first_code_block(std::string_view text);

struct ExtractedTests {
  std::string preamble;
  std::vector<TestCase> tests;
};

/// Splits the first fenced code block at top-level test definitions
/// (profile.test_def_pattern). Lines before the first test form the
/// preamble. Exact duplicate bodies are kept once. Throws Error{extraction}
/// carrying the raw text when no test is found.
ExtractedTests extract_tests(std::string_view output_text, const RunnerProfile& profile, TestOrigin origin,
                             Timestamp created_at);

/// Function source from a generation: the first fenced block, or the whole
/// trimmed text when there is none. Throws Error{extraction} when empty.
std::string extract_function_source(std::string_view output_text);

}  // namespace specloop
