#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "specloop/time.hpp"

namespace specloop {

enum class Difficulty { easy, medium, hard };

std::string_view to_string(Difficulty d);
Difficulty parse_difficulty(std::string_view text);

struct ReferenceTest {
  std::string input;
  std::string expected;
};

struct TaskRecord {
  std::string task_id;
  std::string title;
  std::string statement;
  Difficulty difficulty = Difficulty::easy;
  std::chrono::year_month_day release_date{};
  std::string reference_signature;
  /// Held out; only used by post-hoc validation.
  std::vector<ReferenceTest> reference_tests;
  std::vector<std::string> tags;
};

struct BankFilter {
  /// Empty set accepts every difficulty.
  std::set<Difficulty> difficulties;
  /// Keep only records released strictly after this date.
  std::optional<std::chrono::year_month_day> released_after;
  std::set<std::string> exclude_ids;

  bool accepts(const TaskRecord& r) const;
};

/// Parses one bank document (a JSON array of task objects). `source` names
/// the document in error messages.
std::vector<TaskRecord> parse_bank(std::string_view json_text, std::string_view source = "<bank>");

/// Reads every file, rejects duplicate task_ids across all of them
/// (Error{integrity}), then applies the filter.
std::vector<TaskRecord> ingest_bank(std::span<const std::filesystem::path> files, const BankFilter& filter);

/// One id per line; blank lines and '#' comments ignored.
std::set<std::string> read_id_list(const std::filesystem::path& file);

struct TaskPools {
  std::vector<TaskRecord> warmup;
  std::vector<TaskRecord> evaluation;

  /// Difficulty and size invariants; throws Error{configuration}.
  void validate(std::optional<size_t> warmup_size = 3, std::optional<size_t> evaluation_size = 3) const;

  const TaskRecord* find(std::string_view task_id) const;
};

/// Picks pools by id from an ingested bank.
TaskPools select_pools(std::span<const TaskRecord> bank, std::span<const std::string> warmup_ids,
                       std::span<const std::string> evaluation_ids);

struct Assignment {
  std::string participant_id;
  std::string warmup_task;
  std::string evaluation_task;
  Timestamp assigned_at{};

  bool operator==(const Assignment&) const = default;
};

/// Balanced randomization: the evaluation task is drawn uniformly among the
/// tasks with the fewest prior assignments in `history`; the warm-up task is
/// drawn uniformly from the whole warm-up pool. Pure in (pools, history, seed).
Assignment assign_tasks(const TaskPools& pools, std::string_view participant_id,
                        std::span<const Assignment> history, std::uint64_t seed, Timestamp assigned_at = {});

nlohmann::json to_json(const Assignment& a);
Assignment assignment_from_json(const nlohmann::json& j);

}  // namespace specloop
