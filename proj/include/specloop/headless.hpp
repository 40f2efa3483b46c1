#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "specloop/bundle.hpp"
#include "specloop/llm_gateway.hpp"
#include "specloop/metrics.hpp"
#include "specloop/session_engine.hpp"

namespace specloop {

/// One scripted user action. `at` is seconds after session start on the
/// virtual clock; steps must not go back in time.
struct ScriptStep {
  double at = 0.0;
  std::string action;
  /// Test selector: a 0-based index into the current suite or a test id.
  std::optional<std::string> test;
  std::optional<std::string> guidance;
  std::optional<std::string> body;
  bool use_advice = false;
};

/// Actions: produce_suite, explain, regenerate_test, delete_test, edit_test,
/// regenerate_suite, ask_function, request_advice, regenerate_function,
/// view_function, tick (budget check only), close.
struct HeadlessScript {
  std::string session_id;
  std::string participant_id;
  std::string task_id;
  std::string spec_text;
  std::optional<double> budget_seconds;
  Timestamp start{};
  std::optional<ParticipantProfile> profile;
  std::vector<ScriptStep> steps;
};

/// Parses the JSON script form; `spec` is a path relative to `base_dir`
/// (or inline text under `spec_text`). Throws Error{parse}/{validation}.
HeadlessScript parse_script(const nlohmann::json& j, const std::filesystem::path& base_dir);
HeadlessScript load_script(const std::filesystem::path& file);

struct HeadlessOptions {
  std::shared_ptr<Backend> backend;
  GenerationParams params;
  SessionConfig config;
  PromptTemplates templates = PromptTemplates::builtin();
  /// Defaults to the harness with config.profile/config.limits.
  Executor executor;
  /// Bundle goes to `<out_dir>/<session_id>`.
  std::filesystem::path out_dir;
  /// Used when the script's participant_id is not already a pseudonym.
  std::string pseudonym_salt;
};

struct HeadlessResult {
  std::filesystem::path bundle_dir;
  SessionMetrics metrics;
  Phase final_phase = Phase::spec_loaded;
  std::size_t debounced_steps = 0;
};

/// Drives one session through the script on a virtual clock and exports its
/// bundle. A step the session refuses (wrong phase, unknown test, expired
/// budget, ...) aborts the run with Error{precondition} "step N: ...";
/// debounced steps are skipped and counted. A session still open after the
/// last step is closed.
HeadlessResult headless_run(const HeadlessScript& script, const HeadlessOptions& options);

}  // namespace specloop
