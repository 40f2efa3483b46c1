#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "specloop/bundle.hpp"
#include "specloop/task_bank.hpp"
#include "specloop/test_harness.hpp"

namespace specloop {

/// Post-hoc check of a session's final function against the task's held-out
/// reference tests. Never part of a live session.
struct ReferenceValidation {
  std::string session_id;
  std::string task_id;
  std::optional<std::uint64_t> function_version;
  ExecutionReport report;
  /// Set when there is nothing to run (no function, no reference tests).
  std::optional<std::string> skipped;
};

/// One unittest-style test per reference pair:
/// assertEqual(<function_name>(<input>), <expected>).
TestSuite reference_suite(const TaskRecord& task, const std::string& function_name);

ReferenceValidation validate_against_reference(const LoadedBundle& bundle, const TaskRecord& task,
                                               const RunnerProfile& profile, const ExecutionLimits& limits);

nlohmann::json to_json(const ReferenceValidation& v);

}  // namespace specloop
