#include "specloop/task_bank.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "specloop/error.hpp"

namespace specloop {

using nlohmann::json;

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    case Difficulty::hard: return "hard";
  }
  return "easy";
}

Difficulty parse_difficulty(std::string_view text) {
  if (text == "easy") return Difficulty::easy;
  if (text == "medium") return Difficulty::medium;
  if (text == "hard") return Difficulty::hard;
  throw Error(ErrorKind::parse, "unknown difficulty '" + std::string(text) + "' (want easy|medium|hard)");
}

bool BankFilter::accepts(const TaskRecord& r) const {
  if (!difficulties.empty() && !difficulties.contains(r.difficulty)) return false;
  if (released_after && !(std::chrono::sys_days{r.release_date} > std::chrono::sys_days{*released_after})) {
    return false;
  }
  return !exclude_ids.contains(r.task_id);
}

namespace {

[[noreturn]] void field_error(std::string_view source, size_t index, std::string_view field,
                              const std::string& what) {
  throw Error(ErrorKind::parse, std::string(source) + ": record " + std::to_string(index) + ", field '" +
                                    std::string(field) + "': " + what);
}

const std::string& string_field(const json& rec, std::string_view source, size_t index, const char* field) {
  auto it = rec.find(field);
  if (it == rec.end()) field_error(source, index, field, "missing");
  if (!it->is_string()) field_error(source, index, field, "must be a string");
  return it->get_ref<const std::string&>();
}

TaskRecord parse_record(const json& rec, std::string_view source, size_t index) {
  static const std::set<std::string> allowed = {"task_id",  "title", "statement",       "difficulty",
                                                "release_date", "reference_signature", "tags",
                                                "reference_tests"};
  if (!rec.is_object()) field_error(source, index, "<record>", "must be an object");
  for (auto it = rec.begin(); it != rec.end(); ++it) {
    if (!allowed.contains(it.key())) field_error(source, index, it.key(), "unknown key");
  }
  TaskRecord r;
  r.task_id = string_field(rec, source, index, "task_id");
  if (r.task_id.empty()) field_error(source, index, "task_id", "must not be empty");
  r.title = string_field(rec, source, index, "title");
  r.statement = string_field(rec, source, index, "statement");
  if (r.statement.find_first_not_of(" \t\r\n") == std::string::npos) {
    field_error(source, index, "statement", "must not be empty");
  }
  try {
    r.difficulty = parse_difficulty(string_field(rec, source, index, "difficulty"));
  } catch (const Error& e) {
    field_error(source, index, "difficulty", e.what());
  }
  try {
    r.release_date = parse_date(string_field(rec, source, index, "release_date"));
  } catch (const Error& e) {
    field_error(source, index, "release_date", e.what());
  }
  r.reference_signature = string_field(rec, source, index, "reference_signature");
  auto tags = rec.find("tags");
  if (tags != rec.end() && !tags->is_array()) field_error(source, index, "tags", "must be an array of strings");
  for (const auto& t : tags == rec.end() ? json::array() : *tags) {
    if (!t.is_string()) field_error(source, index, "tags", "must be an array of strings");
    r.tags.push_back(t.get<std::string>());
  }
  if (auto rt = rec.find("reference_tests"); rt != rec.end() && !rt->is_null()) {
    if (!rt->is_array()) field_error(source, index, "reference_tests", "must be an array");
    for (const auto& t : *rt) {
      if (!t.is_object() || !t.contains("input") || !t.contains("expected") || !t["input"].is_string() ||
          !t["expected"].is_string()) {
        field_error(source, index, "reference_tests", "entries need string 'input' and 'expected'");
      }
      r.reference_tests.push_back({t["input"].get<std::string>(), t["expected"].get<std::string>()});
    }
  }
  return r;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::configuration, "cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t draw_index(std::mt19937_64& rng, std::uint64_t n) {
  // Rejection sampling keeps the draw unbiased and independent of the
  // standard library's distribution implementation.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace

std::vector<TaskRecord> parse_bank(std::string_view json_text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string(source) + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorKind::parse, std::string(source) + ": bank must be a JSON array");
  std::vector<TaskRecord> out;
  out.reserve(doc.size());
  for (size_t i = 0; i < doc.size(); ++i) out.push_back(parse_record(doc[i], source, i));
  return out;
}

std::vector<TaskRecord> ingest_bank(std::span<const std::filesystem::path> files, const BankFilter& filter) {
  std::vector<TaskRecord> all;
  std::set<std::string> seen;
  for (const auto& f : files) {
    for (auto& r : parse_bank(read_file(f), f.string())) {
      if (!seen.insert(r.task_id).second) {
        throw Error(ErrorKind::integrity, "duplicate task_id '" + r.task_id + "' in bank");
      }
      all.push_back(std::move(r));
    }
  }
  std::vector<TaskRecord> out;
  for (auto& r : all) {
    if (filter.accepts(r)) out.push_back(std::move(r));
  }
  return out;
}

std::set<std::string> read_id_list(const std::filesystem::path& file) {
  std::istringstream in(read_file(file));
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    ids.insert(line.substr(b, e - b + 1));
  }
  return ids;
}

void TaskPools::validate(std::optional<size_t> warmup_size, std::optional<size_t> evaluation_size) const {
  if (warmup.empty()) throw Error(ErrorKind::configuration, "warm-up pool is empty");
  if (evaluation.empty()) throw Error(ErrorKind::configuration, "evaluation pool is empty");
  for (const auto& t : warmup) {
    if (t.difficulty != Difficulty::easy) {
      throw Error(ErrorKind::configuration, "warm-up task '" + t.task_id + "' is not easy");
    }
  }
  for (const auto& t : evaluation) {
    if (t.difficulty != Difficulty::medium) {
      throw Error(ErrorKind::configuration, "evaluation task '" + t.task_id + "' is not medium");
    }
  }
  if (warmup_size && warmup.size() != *warmup_size) {
    throw Error(ErrorKind::configuration, "warm-up pool has " + std::to_string(warmup.size()) +
                                              " tasks, configured " + std::to_string(*warmup_size));
  }
  if (evaluation_size && evaluation.size() != *evaluation_size) {
    throw Error(ErrorKind::configuration, "evaluation pool has " + std::to_string(evaluation.size()) +
                                              " tasks, configured " + std::to_string(*evaluation_size));
  }
}

const TaskRecord* TaskPools::find(std::string_view task_id) const {
  for (const auto* pool : {&warmup, &evaluation}) {
    for (const auto& t : *pool) {
      if (t.task_id == task_id) return &t;
    }
  }
  return nullptr;
}

TaskPools select_pools(std::span<const TaskRecord> bank, std::span<const std::string> warmup_ids,
                       std::span<const std::string> evaluation_ids) {
  auto pick = [&](const std::string& id) -> const TaskRecord& {
    for (const auto& r : bank) {
      if (r.task_id == id) return r;
    }
    throw Error(ErrorKind::configuration, "pool task '" + id + "' not found in bank");
  };
  TaskPools pools;
  for (const auto& id : warmup_ids) pools.warmup.push_back(pick(id));
  for (const auto& id : evaluation_ids) pools.evaluation.push_back(pick(id));
  return pools;
}

Assignment assign_tasks(const TaskPools& pools, std::string_view participant_id,
                        std::span<const Assignment> history, std::uint64_t seed, Timestamp assigned_at) {
  if (pools.warmup.empty()) throw Error(ErrorKind::configuration, "warm-up pool is empty");
  if (pools.evaluation.empty()) throw Error(ErrorKind::configuration, "evaluation pool is empty");

  std::map<std::string, size_t> counts;
  for (const auto& t : pools.evaluation) counts[t.task_id] = 0;
  for (const auto& a : history) {
    if (auto it = counts.find(a.evaluation_task); it != counts.end()) ++it->second;
  }
  size_t min_count = std::numeric_limits<size_t>::max();
  for (const auto& [_, c] : counts) min_count = std::min(min_count, c);
  // Candidates in pool order so the draw does not depend on map ordering.
  std::vector<const TaskRecord*> candidates;
  for (const auto& t : pools.evaluation) {
    if (counts[t.task_id] == min_count) candidates.push_back(&t);
  }

  std::mt19937_64 rng(seed);
  Assignment a;
  a.participant_id = std::string(participant_id);
  a.evaluation_task = candidates[draw_index(rng, candidates.size())]->task_id;
  a.warmup_task = pools.warmup[draw_index(rng, pools.warmup.size())].task_id;
  a.assigned_at = assigned_at;
  return a;
}

json to_json(const Assignment& a) {
  return {{"participant_id", a.participant_id},
          {"warmup_task", a.warmup_task},
          {"evaluation_task", a.evaluation_task},
          {"assigned_at", format_timestamp(a.assigned_at)}};
}

Assignment assignment_from_json(const json& j) {
  try {
    Assignment a;
    a.participant_id = j.at("participant_id").get<std::string>();
    a.warmup_task = j.at("warmup_task").get<std::string>();
    a.evaluation_task = j.at("evaluation_task").get<std::string>();
    a.assigned_at = parse_timestamp(j.at("assigned_at").get<std::string>());
    return a;
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::parse, std::string("malformed assignment: ") + ex.what());
  }
}

}  // namespace specloop
