#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "specloop/metrics.hpp"
#include "specloop/session_engine.hpp"
#include "specloop/telemetry.hpp"

namespace specloop {

/// Writes a terminal session's bundle into `dir`:
///
///   events.jsonl   one event per line, seq order
///   session.json   summary, assignment, config hashes, live counters,
///                  report wall times, exported_at
///   metrics.csv    header + one row
///   profile.json   pseudonymized participant profile
///   artifacts/     <sha256>.txt snapshots
///
/// Re-exporting the same session changes only `exported_at`. Throws
/// Error{rejected} for a non-terminal session.
void export_bundle(const SessionEngine& session, const std::filesystem::path& dir, Timestamp exported_at);

struct LoadedBundle {
  std::filesystem::path dir;
  std::vector<SessionEvent> events;
  nlohmann::json session;
  std::string metrics_csv;
  nlohmann::json profile;
  /// hash (file stem) -> file content
  std::map<std::string, std::string> artifacts;
};

/// Throws Error{storage} for missing files and Error{parse} for malformed ones.
LoadedBundle read_bundle(const std::filesystem::path& dir);

/// Recomputes the metrics from the bundle's log: reports and the final suite
/// are taken from the artifacts the run_tests and suite events point to.
SessionMetrics metrics_from_bundle(const LoadedBundle& bundle);

struct VerifyOptions {
  /// Regexes for direct identifiers that must not appear anywhere in the
  /// bundle except the flagged free-text field.
  std::vector<std::string> identifier_patterns = {R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})"};
};

struct VerifyResult {
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

/// Integrity audit: gapless seq, hash closure, file names equal content
/// hashes, metrics.csv header and agreement with the recomputed row,
/// pseudonymous ids, and no identifier-pattern matches outside free text.
VerifyResult verify_bundle(const std::filesystem::path& dir, const VerifyOptions& options = {});

}  // namespace specloop
