#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "specloop/llm_gateway.hpp"
#include "specloop/session_engine.hpp"

namespace specloop {

struct GatewaySection {
  std::string backend = "replay";  // replay | live | canned
  std::string endpoint_url;
  std::string api_key_env = "SPECLOOP_API_KEY";
  std::string api_key;  // never read from the file; see AppConfig::load
  GenerationParams params;
  std::string fixture_dir = "fixtures";
  std::string canned_file;
  /// When set, every generation is also written here as a replay fixture.
  std::string record_dir;
  std::int64_t timeout_ms = 120'000;
  std::int64_t max_retries = 3;
};

struct SessionSection {
  double budget_seconds = 2400.0;
  std::int64_t debounce_ms = 300;
  /// Prompt template directory; empty means the built-in templates.
  std::string prompts_dir;
};

struct HarnessSection {
  std::string python = "python3";
  double wall_timeout_seconds = 30.0;
  std::int64_t memory_cap_mb = 1024;
  bool isolate_network = true;
  bool coverage = true;
};

struct BankSection {
  std::vector<std::string> files;
  std::vector<std::string> warmup;
  std::vector<std::string> evaluation;
  std::string after;  // release-date cutoff, YYYY-MM-DD
  std::string exclude_file;
  /// `<spec_dir>/<task_id>.toml` overrides the spec derived from the record.
  std::string spec_dir;
};

struct ServiceSection {
  std::string host = "127.0.0.1";
  std::int64_t port = 8765;
  std::string data_dir = "data";
  std::string salt_env = "SPECLOOP_PSEUDONYM_SALT";
  std::string salt;  // from the environment only
  std::int64_t seed = 0;
  std::string static_dir;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment.
EnvLookup process_env();

/// Tool configuration. Sources, lowest to highest precedence: TOML file,
/// SPECLOOP_<SECTION>_<KEY> environment variables, then explicit overrides
/// ("section.key=value", e.g. from command-line flags). Secrets (API key,
/// pseudonym salt) come only from the environment variables the config names.
/// Relative paths in the file resolve against the file's directory.
struct AppConfig {
  GatewaySection gateway;
  SessionSection session;
  HarnessSection harness;
  BankSection bank;
  ServiceSection service;

  static AppConfig load(const std::optional<std::filesystem::path>& file, const EnvLookup& env = process_env(),
                        const std::vector<std::string>& overrides = {});

  /// Sets one dotted key from text. Throws Error{configuration} for unknown
  /// keys and unparseable values. `base` resolves relative path values.
  void set(std::string_view key, std::string_view value, const std::filesystem::path& base = {});

  /// Every settable dotted key.
  static std::vector<std::string> keys();

  SessionConfig session_config() const;
  ExecutionLimits limits() const;
  RunnerProfile runner_profile() const;
  PromptTemplates templates() const;
  /// Backend selected by gateway.backend, wrapped for recording when
  /// gateway.record_dir is set. Throws Error{configuration}.
  std::shared_ptr<Backend> make_backend() const;

  /// Effective configuration with secrets redacted.
  nlohmann::json to_json() const;
};

}  // namespace specloop
