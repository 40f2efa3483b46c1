#include "specloop/session_engine.hpp"

#include <regex>
#include <sstream>

#include "specloop/error.hpp"

namespace specloop {

using nlohmann::json;

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::spec_loaded: return "spec_loaded";
    case Phase::suite_produced: return "suite_produced";
    case Phase::curating: return "curating";
    case Phase::function_generated: return "function_generated";
    case Phase::executed: return "executed";
    case Phase::completed: return "completed";
    case Phase::expired: return "expired";
  }
  return "spec_loaded";
}

std::string_view to_string(SessionOutcome o) {
  switch (o) {
    case SessionOutcome::pending: return "pending";
    case SessionOutcome::all_pass: return "all_pass";
    case SessionOutcome::budget_expired: return "budget_expired";
  }
  return "pending";
}

std::string_view to_string(CurationKind k) {
  switch (k) {
    case CurationKind::explain: return "explain";
    case CurationKind::regenerate_test: return "regenerate_test";
    case CurationKind::delete_test: return "delete_test";
    case CurationKind::regenerate_suite: return "regenerate_suite";
    case CurationKind::edit_test: return "edit_test";
  }
  return "explain";
}

CurationKind parse_curation_kind(std::string_view text) {
  for (auto k : {CurationKind::explain, CurationKind::regenerate_test, CurationKind::delete_test,
                 CurationKind::regenerate_suite, CurationKind::edit_test}) {
    if (to_string(k) == text) return k;
  }
  if (text == "regenerate") return CurationKind::regenerate_test;
  if (text == "delete") return CurationKind::delete_test;
  if (text == "edit") return CurationKind::edit_test;
  throw Error(ErrorKind::parse, "unknown curation action '" + std::string(text) + "'");
}

void CurationAction::validate() const {
  if (kind == CurationKind::regenerate_suite) {
    if (target_test_id) throw Error(ErrorKind::validation, "regenerate_suite does not take a target test");
    return;
  }
  if (!target_test_id || target_test_id->empty()) {
    throw Error(ErrorKind::validation, std::string(to_string(kind)) + " requires a target test id");
  }
  if (kind == CurationKind::edit_test && (!body || body->find_first_not_of(" \t\r\n") == std::string::npos)) {
    throw Error(ErrorKind::validation, "edit_test requires a non-empty body");
  }
}

Executor harness_executor(const SessionConfig& config) {
  return [profile = config.profile, limits = config.limits](const TestSuite& suite, const FunctionArtifact& fn) {
    return execute(suite, fn, profile, limits);
  };
}

namespace {

Action action_for(CurationKind k) {
  switch (k) {
    case CurationKind::explain: return Action::explain_test;
    case CurationKind::regenerate_test: return Action::regenerate_test;
    case CurationKind::delete_test: return Action::delete_test;
    case CurationKind::regenerate_suite: return Action::regenerate_suite;
    case CurationKind::edit_test: return Action::edit_test;
  }
  return Action::explain_test;
}

std::string merge_preamble(const std::string& existing, const std::string& incoming) {
  std::string out = existing;
  std::istringstream in(incoming);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (existing.find(line) != std::string::npos) continue;
    out += line + "\n";
  }
  return out;
}

}  // namespace

SessionEngine::SessionEngine(SessionInit init, std::shared_ptr<Gateway> gateway, std::shared_ptr<const Clock> clock,
                             Executor executor, SessionConfig config, PromptTemplates templates)
    : gateway_(std::move(gateway)),
      clock_(std::move(clock)),
      executor_(std::move(executor)),
      config_(std::move(config)),
      templates_(std::move(templates)),
      log_(std::string(init.session_id), config_.debounce_window),
      profile_(std::move(init.profile)),
      assignment_(std::move(init.assignment)) {
  if (!gateway_ || !clock_ || !executor_) throw Error(ErrorKind::configuration, "session needs gateway, clock and executor");
  if (init.session_id.empty()) throw Error(ErrorKind::validation, "session id must not be empty");
  if (config_.budget <= Millis{0}) throw Error(ErrorKind::configuration, "session budget must be positive");
  state_.session_id = std::move(init.session_id);
  state_.participant_id = std::move(init.participant_id);
  state_.task_id = std::move(init.task_id);
  state_.spec = std::move(init.spec);
  state_.budget = config_.budget;
  state_.started_at = clock_->now();
  state_.suite.spec_hash = state_.spec.source_hash();

  record(Actor::system, Action::session_start, std::nullopt, std::nullopt, std::nullopt);
  auto spec_hash = artifacts_.snapshot(state_.spec.raw_source(), ArtifactKind::spec);
  record(Actor::system, Action::spec_loaded, std::nullopt, spec_hash, std::nullopt);
}

Millis SessionEngine::remaining_budget() const {
  auto used = clock_->now() - state_.started_at;
  auto left = state_.budget - std::chrono::duration_cast<Millis>(used);
  return left < Millis{0} ? Millis{0} : left;
}

void SessionEngine::record(Actor actor, Action action, std::optional<std::string> target,
                           std::optional<std::string> payload_hash, std::optional<TokenUsage> tokens) {
  SessionEvent e;
  e.timestamp = clock_->now();
  e.actor = actor;
  e.action = action;
  e.target = std::move(target);
  e.payload_hash = std::move(payload_hash);
  e.tokens = tokens;
  if (!log_.record(std::move(e))) {
    // The entry gate already admitted this action; a drop here would leave a
    // mutation without an event.
    throw Error(ErrorKind::integrity, "event for '" + std::string(to_string(action)) + "' was dropped after admission");
  }
}

void SessionEngine::expire(Timestamp at, std::string reason) {
  state_.phase = Phase::expired;
  state_.outcome = SessionOutcome::budget_expired;
  state_.end_reason = reason;
  SessionEvent e;
  e.timestamp = at;
  e.actor = Actor::system;
  e.action = Action::session_end;
  e.target = std::move(reason);
  log_.record(std::move(e));
  log_.close();
}

Phase SessionEngine::tick_budget() { return tick_budget(clock_->now()); }

Phase SessionEngine::tick_budget(Timestamp now) {
  if (!terminal() && now - state_.started_at >= state_.budget) expire(now, "budget");
  return state_.phase;
}

Timestamp SessionEngine::begin(Action action, const std::optional<std::string>& target) {
  if (state_.phase == Phase::completed) {
    throw Error(ErrorKind::rejected, "session '" + state_.session_id + "' is completed");
  }
  if (state_.phase == Phase::expired) {
    throw Error(ErrorKind::budget_expired, "session '" + state_.session_id + "' has expired");
  }
  auto now = clock_->now();
  if (tick_budget(now) == Phase::expired) {
    throw Error(ErrorKind::budget_expired, "session '" + state_.session_id + "' budget elapsed");
  }
  if (!log_.admit(action, target, now)) {
    throw Error(ErrorKind::debounced, "duplicate '" + std::string(to_string(action)) + "' within debounce window");
  }
  return now;
}

void SessionEngine::finish() {
  if (!terminal()) tick_budget();
}

void SessionEngine::require_phase(std::initializer_list<Phase> allowed, std::string_view op) const {
  for (auto p : allowed) {
    if (state_.phase == p) return;
  }
  throw Error(ErrorKind::precondition,
              std::string(op) + " is not allowed in phase " + std::string(to_string(state_.phase)));
}

std::map<std::string, std::string> SessionEngine::base_vars() const {
  return {{"spec", render_for_prompt(state_.spec)},
          {"function_name", state_.spec.function_name()},
          {"signature", state_.spec.signature()},
          {"suite", state_.suite.source_text(config_.profile.import_line)},
          {"guidance", ""},
          {"test", ""},
          {"function", state_.function ? state_.function->source : std::string{}},
          {"failures", failures_text()},
          {"advice", ""}};
}

GenerationResult SessionEngine::generate(GenerationKind kind, std::map<std::string, std::string> vars) {
  auto result = gateway_->generate(kind, templates_.render(kind, vars));
  return result;
}

std::string SessionEngine::snapshot_suite() { return artifacts_.snapshot(to_json(state_.suite).dump(), ArtifactKind::suite); }

std::string SessionEngine::failures_text() const {
  if (!state_.last_report) return "(none)\n";
  std::string out;
  for (const auto& r : state_.last_report->per_test) {
    if (r.outcome == Outcome::pass) continue;
    std::string name = r.test_id.substr(0, 12);
    for (const auto& t : state_.suite.tests) {
      if (t.test_id == r.test_id) name = t.name;
    }
    out += "- " + name + " (" + std::string(to_string(r.outcome)) + "): " + r.failure_message.value_or("") + "\n";
  }
  return out.empty() ? "(none)\n" : out;
}

void SessionEngine::check_unique(const TestCase& candidate, std::optional<std::size_t> replacing) const {
  for (std::size_t i = 0; i < state_.suite.tests.size(); ++i) {
    if (replacing && *replacing == i) continue;
    if (state_.suite.tests[i].test_id == candidate.test_id) {
      throw Error(ErrorKind::validation, "test body duplicates existing test '" + state_.suite.tests[i].name + "'");
    }
  }
}

TestSuite SessionEngine::produce_suite() {
  begin(Action::produce_suite, std::nullopt);
  require_phase({Phase::spec_loaded, Phase::suite_produced, Phase::curating}, "produce_suite");
  auto result = generate(GenerationKind::suite, base_vars());
  auto extracted = extract_tests(result.output_text, config_.profile, TestOrigin::generated, clock_->now());

  state_.suite.suite_version += 1;
  state_.suite.tests = std::move(extracted.tests);
  state_.suite.preamble = std::move(extracted.preamble);
  state_.phase = Phase::suite_produced;
  if (!state_.first_suite_at) state_.first_suite_at = clock_->now();
  ++counters_.suite_productions;
  counters_.tokens.prompt += result.prompt_tokens;
  counters_.tokens.completion += result.completion_tokens;
  record(Actor::user, Action::produce_suite, std::nullopt, snapshot_suite(), result.usage());
  finish();
  return state_.suite;
}

CurationResult SessionEngine::curate(const CurationAction& action) {
  auto act = action_for(action.kind);
  begin(act, action.target_test_id);
  action.validate();
  require_phase({Phase::suite_produced, Phase::curating, Phase::executed}, to_string(action.kind));

  std::optional<std::size_t> index;
  if (action.target_test_id) {
    index = state_.suite.index_of(*action.target_test_id);
    if (!index) throw Error(ErrorKind::not_found, "no test with id '" + *action.target_test_id + "'");
  }
  const auto now = clock_->now();
  CurationResult out;
  std::optional<TokenUsage> tokens;
  std::optional<std::string> payload;

  switch (action.kind) {
    case CurationKind::explain: {
      auto vars = base_vars();
      vars["test"] = state_.suite.tests[*index].body;
      auto result = generate(GenerationKind::explain_test, std::move(vars));
      tokens = result.usage();
      out.explanation = result.output_text;
      payload = artifacts_.snapshot(result.output_text, ArtifactKind::explanation);
      break;
    }
    case CurationKind::regenerate_test: {
      auto vars = base_vars();
      vars["test"] = state_.suite.tests[*index].body;
      vars["guidance"] = action.guidance.value_or("none");
      auto result = generate(GenerationKind::single_test, std::move(vars));
      tokens = result.usage();
      auto extracted = extract_tests(result.output_text, config_.profile, TestOrigin::regenerated, now);
      auto replacement = std::move(extracted.tests.front());
      check_unique(replacement, index);
      state_.suite.preamble = merge_preamble(state_.suite.preamble, extracted.preamble);
      state_.suite.tests[*index] = std::move(replacement);
      break;
    }
    case CurationKind::delete_test: {
      if (state_.suite.size() <= 1) {
        throw Error(ErrorKind::rejected, "cannot delete the last remaining test");
      }
      state_.suite.tests.erase(state_.suite.tests.begin() + static_cast<std::ptrdiff_t>(*index));
      break;
    }
    case CurationKind::edit_test: {
      std::string body = *action.body;
      if (body.back() != '\n') body += '\n';
      std::string name = state_.suite.tests[*index].name;
      std::regex def_re(config_.profile.test_def_pattern);
      std::istringstream lines(body);
      std::string line;
      while (std::getline(lines, line)) {
        std::smatch m;
        if (std::regex_search(line, m, def_re)) {
          name = m.size() > 2 ? m[2].str() : m[1].str();
          break;
        }
      }
      auto edited = TestCase::make(std::move(name), std::move(body), TestOrigin::user_edited, now);
      check_unique(edited, index);
      state_.suite.tests[*index] = std::move(edited);
      break;
    }
    case CurationKind::regenerate_suite: {
      auto vars = base_vars();
      if (action.guidance) vars["guidance"] = "Guidance from the developer: " + *action.guidance + "\n";
      auto result = generate(GenerationKind::suite, std::move(vars));
      tokens = result.usage();
      auto extracted = extract_tests(result.output_text, config_.profile, TestOrigin::generated, now);
      state_.suite.tests = std::move(extracted.tests);
      state_.suite.preamble = std::move(extracted.preamble);
      ++counters_.suite_productions;
      break;
    }
  }

  if (action.kind != CurationKind::explain) {
    state_.suite.suite_version += 1;
    payload = snapshot_suite();
  }
  if (action.kind != CurationKind::regenerate_suite) ++counters_.test_edits;
  if (tokens) {
    counters_.tokens.prompt += tokens->prompt;
    counters_.tokens.completion += tokens->completion;
  }
  state_.phase = Phase::curating;
  record(Actor::user, act, action.target_test_id, payload, tokens);
  out.suite = state_.suite;
  finish();
  return out;
}

ExecutionReport SessionEngine::generate_and_run(Action action, GenerationKind kind,
                                                std::map<std::string, std::string> vars) {
  const Phase previous = state_.phase;
  auto result = generate(kind, std::move(vars));
  auto source = extract_function_source(result.output_text);
  auto version = (state_.function ? state_.function->function_version : 0) + 1;
  state_.function = FunctionArtifact::make(version, std::move(source), state_.suite.suite_version);
  state_.phase = Phase::function_generated;
  ++counters_.function_generations;
  counters_.tokens.prompt += result.prompt_tokens;
  counters_.tokens.completion += result.completion_tokens;
  auto fn_hash = artifacts_.snapshot(state_.function->source, ArtifactKind::function);
  record(Actor::user, action, std::nullopt, fn_hash, result.usage());

  ExecutionReport report;
  try {
    report = executor_(state_.suite, *state_.function);
  } catch (...) {
    state_.phase = previous == Phase::suite_produced ? Phase::suite_produced
                   : previous == Phase::executed      ? Phase::executed
                                                      : Phase::curating;
    throw;
  }
  report.suite_version = state_.suite.suite_version;
  report.function_version = state_.function->function_version;
  reports_.push_back(report);
  state_.last_report = report;
  auto report_hash = artifacts_.snapshot(to_json(report).dump(), ArtifactKind::report);
  record(Actor::system, Action::run_tests, std::to_string(report.function_version), report_hash, std::nullopt);

  if (report.all_pass()) {
    counters_.generations_to_first_pass = counters_.function_generations;
    counters_.first_pass_at = clock_->now();
    state_.phase = Phase::completed;
    state_.outcome = SessionOutcome::all_pass;
    state_.end_reason = "completed";
    record(Actor::system, Action::session_end, "completed", std::nullopt, std::nullopt);
    log_.close();
  } else {
    state_.phase = Phase::executed;
    finish();
  }
  return report;
}

ExecutionReport SessionEngine::ask_function() {
  begin(Action::ask_function, std::nullopt);
  require_phase({Phase::suite_produced, Phase::curating, Phase::executed}, "ask_function");
  if (state_.suite.empty()) throw Error(ErrorKind::precondition, "ask_function needs a non-empty suite");
  return generate_and_run(Action::ask_function, GenerationKind::function, base_vars());
}

ExecutionReport SessionEngine::regenerate_function(bool use_advice) {
  begin(Action::regenerate_function, std::nullopt);
  if (!state_.function) throw Error(ErrorKind::precondition, "regenerate_function needs an existing function");
  require_phase({Phase::curating, Phase::executed}, "regenerate_function");
  if (use_advice && !state_.latest_advice) {
    throw Error(ErrorKind::precondition, "regenerate_function with advice requested but no advice was generated");
  }
  auto vars = base_vars();
  if (use_advice) vars["advice"] = "Advice:\n" + *state_.latest_advice + "\n";
  return generate_and_run(Action::regenerate_function, GenerationKind::regenerate_function, std::move(vars));
}

std::string SessionEngine::request_advice() {
  std::optional<std::string> target;
  if (state_.function) target = std::to_string(state_.function->function_version);
  // Checked ahead of terminality so that asking for advice on a passing
  // function reads as a precondition failure rather than a closed session.
  if (state_.last_report && state_.last_report->all_pass()) {
    throw Error(ErrorKind::precondition, "advice needs a report with at least one failing test");
  }
  begin(Action::advice_generated, target);
  require_phase({Phase::curating, Phase::executed}, "request_advice");
  if (!state_.last_report || state_.last_report->all_pass()) {
    throw Error(ErrorKind::precondition, "advice needs a report with at least one failing test");
  }
  auto result = generate(GenerationKind::advice, base_vars());
  state_.latest_advice = result.output_text;
  ++counters_.advice_triggers;
  counters_.tokens.prompt += result.prompt_tokens;
  counters_.tokens.completion += result.completion_tokens;
  auto hash = artifacts_.snapshot(result.output_text, ArtifactKind::advice);
  record(Actor::user, Action::advice_generated, target, hash, result.usage());
  finish();
  return result.output_text;
}

void SessionEngine::view_function() {
  std::optional<std::string> target;
  if (state_.function) target = std::to_string(state_.function->function_version);
  begin(Action::function_viewed, target);
  if (!state_.function) throw Error(ErrorKind::precondition, "no function to view");
  record(Actor::user, Action::function_viewed, target, std::nullopt, std::nullopt);
  finish();
}

void SessionEngine::close() {
  if (terminal()) return;
  auto now = clock_->now();
  if (tick_budget(now) == Phase::expired) return;
  expire(now, "closed");
}

void SessionEngine::set_profile(ParticipantProfile profile) { profile_ = std::move(profile); }

}  // namespace specloop
