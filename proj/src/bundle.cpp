#include "specloop/bundle.hpp"

#include <regex>

#include "specloop/error.hpp"
#include "specloop/hashing.hpp"

namespace specloop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json opt_time(const std::optional<Timestamp>& t) { return t ? json(format_timestamp(*t)) : json(nullptr); }

json session_summary(const SessionEngine& engine) {
  const auto& s = engine.state();
  const auto& c = engine.counters();
  const auto& cfg = engine.config();

  json reports = json::array();
  for (const auto& r : engine.reports()) {
    reports.push_back({{"function_version", r.function_version},
                       {"suite_version", r.suite_version},
                       {"wall_time_ms", r.wall_time.count()}});
  }
  json limits = {{"wall_timeout_ms", cfg.limits.wall_timeout.count()},
                 {"memory_cap_bytes", cfg.limits.memory_cap_bytes ? json(*cfg.limits.memory_cap_bytes) : json(nullptr)},
                 {"isolate_network", cfg.limits.isolate_network}};
  json out;
  out["summary"] = {{"session_id", s.session_id},
                    {"participant_id", s.participant_id},
                    {"task_id", s.task_id},
                    {"phase", to_string(s.phase)},
                    {"outcome", to_string(s.outcome)},
                    {"end_reason", s.end_reason ? json(*s.end_reason) : json(nullptr)},
                    {"started_at", format_timestamp(s.started_at)},
                    {"first_suite_at", opt_time(s.first_suite_at)},
                    {"budget_ms", s.budget.count()},
                    {"suite_version", s.suite.suite_version},
                    {"function_version", s.function ? json(s.function->function_version) : json(nullptr)},
                    {"spec_hash", s.spec.source_hash()}};
  out["assignment"] = engine.assignment() ? to_json(*engine.assignment()) : json(nullptr);
  out["config"] = {{"budget_ms", cfg.budget.count()},
                   {"debounce_window_ms", cfg.debounce_window.count()},
                   {"generation_params", engine.gateway().params().to_json()},
                   {"generation_params_hash", engine.gateway().params().fingerprint()},
                   {"backend", engine.gateway().backend_id()},
                   {"prompt_template_hashes", engine.templates().hashes()},
                   {"runner_profile", cfg.profile.name},
                   {"runner_profile_hash", cfg.profile.fingerprint()},
                   {"boilerplate_tokens", cfg.profile.boilerplate_tokens},
                   {"limits", limits}};
  out["live_counters"] = {{"test_edits", c.test_edits},
                          {"suite_productions", c.suite_productions},
                          {"advice_triggers", c.advice_triggers},
                          {"function_generations", c.function_generations},
                          {"generations_to_first_pass",
                           c.generations_to_first_pass ? json(*c.generations_to_first_pass) : json(nullptr)},
                          {"first_pass_at", opt_time(c.first_pass_at)},
                          {"prompt_tokens", c.tokens.prompt},
                          {"completion_tokens", c.tokens.completion}};
  out["dropped_duplicate_events"] = engine.log().dropped();
  out["report_wall_times"] = reports;
  return out;
}

std::optional<TestSuite> last_suite(std::span<const SessionEvent> events,
                                    const std::function<const std::string*(const std::string&)>& lookup) {
  std::optional<TestSuite> suite;
  for (const auto& e : events) {
    switch (e.action) {
      case Action::produce_suite:
      case Action::regenerate_suite:
      case Action::regenerate_test:
      case Action::delete_test:
      case Action::edit_test:
        if (e.payload_hash) {
          if (const auto* text = lookup(*e.payload_hash)) suite = suite_from_json(json::parse(*text));
        }
        break;
      default:
        break;
    }
  }
  return suite;
}

std::vector<ExecutionReport> run_reports(std::span<const SessionEvent> events,
                                         const std::function<const std::string*(const std::string&)>& lookup) {
  std::vector<ExecutionReport> out;
  for (const auto& e : events) {
    if (e.action != Action::run_tests || !e.payload_hash) continue;
    const auto* text = lookup(*e.payload_hash);
    if (!text) throw Error(ErrorKind::integrity, "run_tests event " + std::to_string(e.seq) + " has no report artifact");
    out.push_back(report_from_json(json::parse(*text)));
  }
  return out;
}

SessionMetrics metrics_from_log(std::span<const SessionEvent> events, const json& session,
                                const std::function<const std::string*(const std::string&)>& lookup) {
  auto reports = run_reports(events, lookup);
  MetricsInput in;
  in.events = events;
  in.reports = reports;
  in.budget = Millis{session.at("config").at("budget_ms").get<std::int64_t>()};
  in.final_suite = last_suite(events, lookup);
  in.boilerplate_tokens = session.at("config").value("boilerplate_tokens", std::vector<std::string>{});
  in.session_id = session.at("summary").at("session_id").get<std::string>();
  in.task_id = session.at("summary").at("task_id").get<std::string>();
  return compute_session_metrics(in);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

void export_bundle(const SessionEngine& engine, const fs::path& dir, Timestamp exported_at) {
  if (!engine.terminal()) {
    throw Error(ErrorKind::rejected, "session '" + engine.state().session_id + "' is not terminal; export refused");
  }
  std::error_code ec;
  fs::create_directories(dir / "artifacts", ec);
  if (ec) throw Error(ErrorKind::storage, "cannot create " + (dir / "artifacts").string() + ": " + ec.message());

  engine.artifacts().write_all(dir / "artifacts");
  write_file_atomic(dir / "events.jsonl", to_jsonl(engine.log().events()));

  json session = session_summary(engine);
  session["exported_at"] = format_timestamp(exported_at);
  write_file_atomic(dir / "session.json", dump(session));

  auto lookup = [&](const std::string& h) -> const std::string* {
    const auto* e = engine.artifacts().find(h);
    return e ? &e->text : nullptr;
  };
  auto m = metrics_from_log(engine.log().events(), session, lookup);
  write_file_atomic(dir / "metrics.csv", metrics_csv(std::span<const SessionMetrics>(&m, 1)));

  json profile;
  if (engine.profile()) {
    profile = to_json(*engine.profile());
  } else {
    profile = {{"participant_id", engine.state().participant_id}, {"collected", false}};
  }
  write_file_atomic(dir / "profile.json", dump(profile));
}

LoadedBundle read_bundle(const fs::path& dir) {
  LoadedBundle b;
  b.dir = dir;
  for (const char* name : {"events.jsonl", "session.json", "metrics.csv", "profile.json"}) {
    if (!fs::is_regular_file(dir / name)) throw Error(ErrorKind::storage, "bundle is missing " + std::string(name));
  }
  b.events = parse_jsonl(read_text_file(dir / "events.jsonl"));
  try {
    b.session = json::parse(read_text_file(dir / "session.json"));
    b.profile = json::parse(read_text_file(dir / "profile.json"));
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::parse, std::string("bundle JSON: ") + ex.what());
  }
  b.metrics_csv = read_text_file(dir / "metrics.csv");
  if (fs::is_directory(dir / "artifacts")) {
    for (const auto& entry : fs::directory_iterator(dir / "artifacts")) {
      if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
      b.artifacts[entry.path().stem().string()] = read_text_file(entry.path());
    }
  }
  return b;
}

SessionMetrics metrics_from_bundle(const LoadedBundle& b) {
  auto lookup = [&](const std::string& h) -> const std::string* {
    auto it = b.artifacts.find(h);
    return it == b.artifacts.end() ? nullptr : &it->second;
  };
  try {
    return metrics_from_log(b.events, b.session, lookup);
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::parse, std::string("bundle content: ") + ex.what());
  }
}

namespace {

void scrub_free_text(json& profile) {
  if (!profile.is_object()) return;
  auto pt = profile.find("post_task");
  if (pt != profile.end() && pt->is_object() && pt->contains("free_text")) (*pt)["free_text"] = "";
}

}  // namespace

VerifyResult verify_bundle(const fs::path& dir, const VerifyOptions& options) {
  VerifyResult r;
  auto problem = [&](std::string p) { r.problems.push_back(std::move(p)); };

  LoadedBundle b;
  try {
    b = read_bundle(dir);
  } catch (const Error& e) {
    problem(e.what());
    return r;
  }

  // Sequence and identity.
  std::string session_id = b.session.value("summary", json::object()).value("session_id", std::string{});
  for (std::size_t i = 0; i < b.events.size(); ++i) {
    if (b.events[i].seq != i + 1) {
      problem("event seq gap: expected " + std::to_string(i + 1) + ", found " + std::to_string(b.events[i].seq));
      break;
    }
  }
  for (const auto& e : b.events) {
    if (e.session_id != session_id) {
      problem("event " + std::to_string(e.seq) + " belongs to session '" + e.session_id + "'");
      break;
    }
  }
  if (b.events.empty() || b.events.back().action != Action::session_end) {
    problem("log does not end with session_end");
  }

  // Hash closure.
  for (const auto& [hash, text] : b.artifacts) {
    if (sha256_hex(text) != hash) problem("artifact " + hash + ".txt: content hash mismatch");
  }
  for (const auto& e : b.events) {
    if (e.payload_hash && !b.artifacts.contains(*e.payload_hash)) {
      problem("event " + std::to_string(e.seq) + ": payload " + *e.payload_hash + " has no artifact");
    }
  }

  // Metrics file against the log.
  try {
    auto rows = parse_metrics_csv(b.metrics_csv);
    if (rows.size() != 1) problem("metrics.csv must hold exactly one row");
    if (r.ok()) {
      auto expected = metrics_csv_row(metrics_from_bundle(b));
      auto actual = metrics_csv_row(rows.front());
      if (expected != actual) problem("metrics.csv disagrees with the log: '" + actual + "' vs '" + expected + "'");
    }
  } catch (const Error& e) {
    problem(std::string("metrics.csv: ") + e.what());
  }

  // Pseudonymity.
  std::string pid = b.session.value("summary", json::object()).value("participant_id", std::string{});
  if (!is_pseudonym(pid)) problem("participant_id '" + pid + "' is not a pseudonym");
  if (b.profile.value("participant_id", std::string{}) != pid) problem("profile.json participant_id differs");
  if (b.profile.contains("programming_experience_years")) {
    try {
      profile_from_json(b.profile);
    } catch (const Error& e) {
      problem(std::string("profile.json: ") + e.what());
    }
  }
  std::vector<std::regex> patterns;
  for (const auto& p : options.identifier_patterns) {
    try {
      patterns.emplace_back(p);
    } catch (const std::regex_error&) {
      problem("invalid identifier pattern '" + p + "'");
    }
  }
  json scrubbed = b.profile;
  scrub_free_text(scrubbed);
  std::vector<std::pair<std::string, std::string>> texts = {
      {"events.jsonl", read_text_file(dir / "events.jsonl")},
      {"session.json", b.session.dump()},
      {"metrics.csv", b.metrics_csv},
      {"profile.json", scrubbed.dump()}};
  for (const auto& [hash, text] : b.artifacts) texts.emplace_back("artifacts/" + hash + ".txt", text);
  for (const auto& [name, text] : texts) {
    for (std::size_t i = 0; i < patterns.size(); ++i) {
      if (std::regex_search(text, patterns[i])) {
        problem(name + " matches identifier pattern '" + options.identifier_patterns[i] + "'");
      }
    }
  }
  return r;
}

}  // namespace specloop
