#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specloop/llm_gateway.hpp"
#include "specloop/prompts.hpp"
#include "specloop/spec_model.hpp"
#include "specloop/task_bank.hpp"
#include "specloop/telemetry.hpp"
#include "specloop/test_harness.hpp"
#include "specloop/time.hpp"

namespace specloop {

enum class Phase { spec_loaded, suite_produced, curating, function_generated, executed, completed, expired };
enum class SessionOutcome { pending, all_pass, budget_expired };

std::string_view to_string(Phase p);
std::string_view to_string(SessionOutcome o);

enum class CurationKind { explain, regenerate_test, delete_test, regenerate_suite, edit_test };

std::string_view to_string(CurationKind k);
CurationKind parse_curation_kind(std::string_view text);

struct CurationAction {
  CurationKind kind = CurationKind::explain;
  std::optional<std::string> target_test_id;
  std::optional<std::string> guidance;
  /// Replacement body for edit_test.
  std::optional<std::string> body;

  /// Target required for every kind except regenerate_suite, which forbids
  /// it; edit_test needs a body. Throws Error{validation}.
  void validate() const;
};

struct CurationResult {
  TestSuite suite;
  std::optional<std::string> explanation;
};

struct SessionConfig {
  Millis budget{40 * 60 * 1000};
  Millis debounce_window{300};
  RunnerProfile profile = RunnerProfile::python_unittest();
  ExecutionLimits limits;
};

struct SessionInit {
  std::string session_id;
  std::string participant_id;
  std::string task_id;
  ProblemSpec spec;
  std::optional<ParticipantProfile> profile;
  std::optional<Assignment> assignment;
};

/// Read-only view of a session's state.
struct Session {
  std::string session_id;
  std::string participant_id;
  std::string task_id;
  ProblemSpec spec;
  TestSuite suite;
  std::optional<FunctionArtifact> function;
  std::optional<ExecutionReport> last_report;
  Phase phase = Phase::spec_loaded;
  Timestamp started_at{};
  std::optional<Timestamp> first_suite_at;
  Millis budget{0};
  SessionOutcome outcome = SessionOutcome::pending;
  std::optional<std::string> latest_advice;
  std::optional<std::string> end_reason;
};

/// In-memory tallies kept alongside the log; the exported log must yield the
/// same numbers.
struct LiveCounters {
  std::size_t test_edits = 0;
  std::size_t suite_productions = 0;
  std::size_t advice_triggers = 0;
  std::size_t function_generations = 0;
  std::optional<std::size_t> generations_to_first_pass;
  std::optional<Timestamp> first_pass_at;
  TokenUsage tokens;
};

using Executor = std::function<ExecutionReport(const TestSuite&, const FunctionArtifact&)>;

/// Runs through the harness with the config's runner profile and limits.
Executor harness_executor(const SessionConfig& config);

/// One participant's workflow:
///
///   spec_loaded -> suite_produced -> curating <-> curating
///     -> function_generated -> executed -> completed | curating | executed ...
///   any non-terminal phase -> expired (budget or close)
///
/// Every operation first checks terminality and the budget, then the
/// duplicate-click gate, then its own preconditions. Mutations are logged
/// after they succeed; a failed generation leaves the phase unchanged.
/// Single-writer: callers serialize access per session.
class SessionEngine {
 public:
  SessionEngine(SessionInit init, std::shared_ptr<Gateway> gateway, std::shared_ptr<const Clock> clock,
                Executor executor, SessionConfig config = {}, PromptTemplates templates = PromptTemplates::builtin());

  const Session& state() const { return state_; }
  const EventLog& log() const { return log_; }
  const ArtifactStore& artifacts() const { return artifacts_; }
  const std::vector<ExecutionReport>& reports() const { return reports_; }
  const LiveCounters& counters() const { return counters_; }
  const SessionConfig& config() const { return config_; }
  const PromptTemplates& templates() const { return templates_; }
  const Gateway& gateway() const { return *gateway_; }
  const std::optional<ParticipantProfile>& profile() const { return profile_; }
  const std::optional<Assignment>& assignment() const { return assignment_; }
  const Clock& clock() const { return *clock_; }

  bool terminal() const { return state_.phase == Phase::completed || state_.phase == Phase::expired; }
  Millis remaining_budget() const;

  TestSuite produce_suite();
  CurationResult curate(const CurationAction& action);
  ExecutionReport ask_function();
  std::string request_advice();
  ExecutionReport regenerate_function(bool use_advice);
  void view_function();

  /// Expires the session when the budget has elapsed (closed interval).
  /// Completed sessions never expire.
  Phase tick_budget();
  Phase tick_budget(Timestamp now);

  /// Ends a session that is not yet terminal; the session_end event carries
  /// target "closed", which analysis treats as an interruption marker.
  void close();

  /// Attach or replace the participant profile (e.g. post-task feedback).
  void set_profile(ParticipantProfile profile);

 private:
  Timestamp begin(Action action, const std::optional<std::string>& target);
  void finish();
  void require_phase(std::initializer_list<Phase> allowed, std::string_view op) const;
  void expire(Timestamp at, std::string reason);
  void record(Actor actor, Action action, std::optional<std::string> target,
              std::optional<std::string> payload_hash, std::optional<TokenUsage> tokens);
  GenerationResult generate(GenerationKind kind, std::map<std::string, std::string> vars);
  std::map<std::string, std::string> base_vars() const;
  std::string snapshot_suite();
  std::string failures_text() const;
  ExecutionReport generate_and_run(Action action, GenerationKind kind, std::map<std::string, std::string> vars);
  void check_unique(const TestCase& candidate, std::optional<std::size_t> replacing) const;

  Session state_;
  std::shared_ptr<Gateway> gateway_;
  std::shared_ptr<const Clock> clock_;
  Executor executor_;
  SessionConfig config_;
  PromptTemplates templates_;
  EventLog log_;
  ArtifactStore artifacts_;
  std::vector<ExecutionReport> reports_;
  LiveCounters counters_;
  std::optional<ParticipantProfile> profile_;
  std::optional<Assignment> assignment_;
};

}  // namespace specloop
