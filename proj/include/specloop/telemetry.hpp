#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "specloop/time.hpp"

namespace specloop {

enum class Actor { user, system };

enum class Action {
  session_start,
  spec_loaded,
  produce_suite,
  explain_test,
  regenerate_test,
  delete_test,
  edit_test,
  regenerate_suite,
  ask_function,
  regenerate_function,
  run_tests,
  advice_generated,
  function_viewed,
  session_end,
};

std::string_view to_string(Actor a);
std::string_view to_string(Action a);
Actor parse_actor(std::string_view text);
Action parse_action(std::string_view text);

struct TokenUsage {
  std::int64_t prompt = 0;
  std::int64_t completion = 0;

  std::int64_t total() const { return prompt + completion; }
  bool operator==(const TokenUsage&) const = default;
};

struct SessionEvent {
  std::uint64_t seq = 0;
  Timestamp timestamp{};
  std::string session_id;
  Actor actor = Actor::system;
  Action action = Action::session_start;
  std::optional<std::string> target;
  std::optional<std::string> payload_hash;
  std::optional<TokenUsage> tokens;

  bool operator==(const SessionEvent&) const = default;
};

nlohmann::json to_json(const SessionEvent& e);
SessionEvent event_from_json(const nlohmann::json& j);

/// One compact JSON object per line, in seq order.
std::string to_jsonl(std::span<const SessionEvent> events);
std::vector<SessionEvent> parse_jsonl(std::string_view text);

/// Append-only per-session log with duplicate-click filtering.
///
/// A user event whose (action, target) equals the immediately preceding
/// accepted user event and arrives less than `debounce_window` after it is
/// dropped and counted. System events are never debounced. Sequence numbers
/// are assigned here, starting at 1, with no gaps.
class EventLog {
 public:
  explicit EventLog(std::string session_id, Millis debounce_window = Millis{300});

  /// Appends unless debounced. The event's seq and session_id are overwritten.
  /// Throws Error{rejected} once the log is closed.
  bool record(SessionEvent event);

  /// Debounce gate for an action about to run: returns false (and counts the
  /// drop) when `record` would drop a user event with this key at `at`.
  bool admit(Action action, const std::optional<std::string>& target, Timestamp at);

  void close() { closed_ = true; }
  bool closed() const { return closed_; }

  const std::string& session_id() const { return session_id_; }
  Millis debounce_window() const { return window_; }
  std::span<const SessionEvent> events() const { return events_; }
  std::size_t dropped() const { return dropped_; }

 private:
  bool is_duplicate(Action action, const std::optional<std::string>& target, Timestamp at) const;

  std::string session_id_;
  Millis window_;
  std::vector<SessionEvent> events_;
  std::optional<std::size_t> last_user_;
  std::size_t dropped_ = 0;
  bool closed_ = false;
};

enum class ArtifactKind { spec, suite, function, advice, report, explanation };

std::string_view to_string(ArtifactKind k);
ArtifactKind parse_artifact_kind(std::string_view text);

/// Content-addressed text store keyed by SHA-256. With a root directory every
/// snapshot is also written to `<root>/<hash>.txt` (write-once); an I/O
/// failure throws Error{storage}.
class ArtifactStore {
 public:
  struct Entry {
    std::string text;
    ArtifactKind kind;
  };

  explicit ArtifactStore(std::optional<std::filesystem::path> root = std::nullopt);

  std::string snapshot(std::string_view text, ArtifactKind kind);
  const Entry* find(std::string_view hash) const;
  const std::map<std::string, Entry, std::less<>>& entries() const { return entries_; }

  /// Writes every artifact as `<dir>/<hash>.txt`.
  void write_all(const std::filesystem::path& dir) const;

 private:
  std::optional<std::filesystem::path> root_;
  std::map<std::string, Entry, std::less<>> entries_;
};

/// Writes bytes to `path` atomically (temp file + rename). Throws Error{storage}.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_text_file(const std::filesystem::path& path);

enum class Familiarity { none, low, medium, high };
enum class LlmUse { never, occasionally, frequently };

std::string_view to_string(Familiarity f);
std::string_view to_string(LlmUse u);

struct PostTaskFeedback {
  std::vector<int> likert_items;  // each 1..5
  std::string free_text;          // flagged for manual review before release
};

struct ParticipantProfile {
  std::string participant_id;
  int programming_experience_years = 0;
  Familiarity python_familiarity = Familiarity::none;
  Familiarity prior_tdd_experience = Familiarity::none;
  LlmUse prior_llm_codegen_use = LlmUse::never;
  std::optional<PostTaskFeedback> post_task;
};

nlohmann::json to_json(const ParticipantProfile& p);
/// Rejects unknown keys (no room for direct identifiers) and out-of-range values.
ParticipantProfile profile_from_json(const nlohmann::json& j);

/// Stable pseudonym "P-" + 12 hex chars of SHA-256(salt + ":" + raw).
std::string pseudonymize(std::string_view raw_identifier, std::string_view salt);
bool is_pseudonym(std::string_view id);

}  // namespace specloop
