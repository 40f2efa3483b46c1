#include "specloop/headless.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "specloop/error.hpp"
#include "specloop/spec_model.hpp"

namespace specloop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string>& known_actions() {
  static const std::vector<std::string> a = {"produce_suite",  "explain",          "regenerate_test",
                                             "delete_test",    "edit_test",        "regenerate_suite",
                                             "ask_function",   "request_advice",   "regenerate_function",
                                             "view_function",  "tick",             "close"};
  return a;
}

std::optional<std::string> opt_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

HeadlessScript parse_script(const json& j, const fs::path& base_dir) {
  static const std::set<std::string> top_keys = {"session_id", "participant_id", "task_id", "spec", "spec_text",
                                                 "budget_seconds", "start", "profile", "steps"};
  static const std::set<std::string> step_keys = {"at", "do", "test", "guidance", "body", "use_advice"};
  if (!j.is_object()) throw Error(ErrorKind::parse, "script must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!top_keys.contains(it.key())) throw Error(ErrorKind::validation, "script: unknown key '" + it.key() + "'");
  }
  HeadlessScript s;
  try {
    s.session_id = j.at("session_id").get<std::string>();
    s.participant_id = j.at("participant_id").get<std::string>();
    s.task_id = j.at("task_id").get<std::string>();
    if (j.contains("spec_text")) {
      s.spec_text = j.at("spec_text").get<std::string>();
    } else {
      fs::path p = j.at("spec").get<std::string>();
      s.spec_text = read_text_file(p.is_absolute() ? p : base_dir / p);
    }
    if (j.contains("budget_seconds")) s.budget_seconds = j.at("budget_seconds").get<double>();
    s.start = parse_timestamp(j.value("start", std::string("2025-01-01T00:00:00.000Z")));
    if (j.contains("profile") && !j.at("profile").is_null()) s.profile = profile_from_json(j.at("profile"));

    double last_at = 0.0;
    std::size_t index = 0;
    for (const auto& step : j.at("steps")) {
      for (auto it = step.begin(); it != step.end(); ++it) {
        if (!step_keys.contains(it.key())) {
          throw Error(ErrorKind::validation, "script step " + std::to_string(index) + ": unknown key '" + it.key() + "'");
        }
      }
      ScriptStep st;
      st.at = step.value("at", last_at);
      st.action = step.at("do").get<std::string>();
      if (std::find(known_actions().begin(), known_actions().end(), st.action) == known_actions().end()) {
        throw Error(ErrorKind::validation, "script step " + std::to_string(index) + ": unknown action '" + st.action + "'");
      }
      if (!std::isfinite(st.at) || st.at < last_at) {
        throw Error(ErrorKind::validation, "script step " + std::to_string(index) + ": time goes backwards");
      }
      if (auto t = step.find("test"); t != step.end() && !t->is_null()) {
        st.test = t->is_number_integer() ? std::to_string(t->get<std::int64_t>()) : t->get<std::string>();
      }
      st.guidance = opt_string(step, "guidance");
      st.body = opt_string(step, "body");
      st.use_advice = step.value("use_advice", false);
      last_at = st.at;
      s.steps.push_back(std::move(st));
      ++index;
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::parse, std::string("script: ") + ex.what());
  }
  if (s.session_id.empty() || s.session_id.find_first_of("/\\,\n") != std::string::npos || s.session_id == "." ||
      s.session_id == "..") {
    throw Error(ErrorKind::validation, "script: session_id must be a plain name");
  }
  return s;
}

HeadlessScript load_script(const fs::path& file) {
  json j;
  try {
    j = json::parse(read_text_file(file));
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::parse, file.string() + ": " + ex.what());
  }
  return parse_script(j, file.parent_path());
}

namespace {

std::string resolve_test(const SessionEngine& engine, const std::optional<std::string>& selector) {
  if (!selector) throw Error(ErrorKind::validation, "step needs a test selector");
  const auto& tests = engine.state().suite.tests;
  const auto& sel = *selector;
  if (!sel.empty() && sel.find_first_not_of("0123456789") == std::string::npos && sel.size() < 10) {
    auto idx = std::stoul(sel);
    if (idx >= tests.size()) {
      throw Error(ErrorKind::not_found, "test index " + sel + " out of range (suite has " +
                                            std::to_string(tests.size()) + ")");
    }
    return tests[idx].test_id;
  }
  return sel;
}

void run_step(SessionEngine& engine, const ScriptStep& step) {
  const auto& a = step.action;
  if (a == "produce_suite") {
    engine.produce_suite();
  } else if (a == "ask_function") {
    engine.ask_function();
  } else if (a == "request_advice") {
    engine.request_advice();
  } else if (a == "regenerate_function") {
    engine.regenerate_function(step.use_advice);
  } else if (a == "view_function") {
    engine.view_function();
  } else if (a == "tick") {
    engine.tick_budget();
  } else if (a == "close") {
    engine.close();
  } else {
    CurationAction c;
    c.kind = parse_curation_kind(a);
    if (c.kind != CurationKind::regenerate_suite) c.target_test_id = resolve_test(engine, step.test);
    c.guidance = step.guidance;
    c.body = step.body;
    engine.curate(c);
  }
}

}  // namespace

HeadlessResult headless_run(const HeadlessScript& script, const HeadlessOptions& options) {
  if (!options.backend) throw Error(ErrorKind::configuration, "headless run needs a generation backend");
  auto clock = std::make_shared<VirtualClock>(script.start);
  auto gateway = std::make_shared<Gateway>(options.backend, options.params);

  SessionConfig config = options.config;
  if (script.budget_seconds) config.budget = from_seconds(*script.budget_seconds);
  Executor executor = options.executor ? options.executor : harness_executor(config);

  SessionInit init;
  init.session_id = script.session_id;
  init.participant_id = is_pseudonym(script.participant_id)
                            ? script.participant_id
                            : pseudonymize(script.participant_id, options.pseudonym_salt);
  init.task_id = script.task_id;
  init.spec = parse_spec(script.spec_text);
  if (script.profile) {
    init.profile = script.profile;
    init.profile->participant_id = init.participant_id;
  }

  SessionEngine engine(std::move(init), gateway, clock, std::move(executor), config, options.templates);

  HeadlessResult result;
  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    const auto& step = script.steps[i];
    clock->set(script.start + from_seconds(step.at));
    try {
      run_step(engine, step);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::debounced) {
        ++result.debounced_steps;
        continue;
      }
      const bool refused = e.kind() == ErrorKind::precondition || e.kind() == ErrorKind::not_found ||
                           e.kind() == ErrorKind::rejected || e.kind() == ErrorKind::budget_expired ||
                           e.kind() == ErrorKind::validation;
      throw Error(refused ? ErrorKind::precondition : e.kind(),
                  "step " + std::to_string(i) + " (" + step.action + "): " + e.what(), e.detail());
    }
  }
  if (!engine.terminal()) engine.close();

  result.bundle_dir = options.out_dir / script.session_id;
  export_bundle(engine, result.bundle_dir, clock->now());
  result.metrics = metrics_from_bundle(read_bundle(result.bundle_dir));
  result.final_phase = engine.state().phase;
  return result;
}

}  // namespace specloop
