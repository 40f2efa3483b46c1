#include "specloop/reference.hpp"

#include "specloop/error.hpp"
#include "specloop/spec_model.hpp"

namespace specloop {

using nlohmann::json;

TestSuite reference_suite(const TaskRecord& task, const std::string& function_name) {
  TestSuite suite;
  suite.suite_version = 1;
  std::size_t i = 0;
  for (const auto& ref : task.reference_tests) {
    ++i;
    const std::string name = "test_reference_" + std::to_string(i);
    std::string body = "def " + name + "(self):\n";
    body += "    self.assertEqual(" + function_name + "(" + ref.input + "), " + ref.expected + ")\n";
    suite.tests.push_back(TestCase::make(name, body, TestOrigin::generated, Timestamp{}));
  }
  return suite;
}

ReferenceValidation validate_against_reference(const LoadedBundle& bundle, const TaskRecord& task,
                                               const RunnerProfile& profile, const ExecutionLimits& limits) {
  ReferenceValidation v;
  v.session_id = bundle.session.at("summary").at("session_id").get<std::string>();
  v.task_id = bundle.session.at("summary").at("task_id").get<std::string>();
  if (v.task_id != task.task_id) {
    throw Error(ErrorKind::validation, "bundle is for task '" + v.task_id + "', not '" + task.task_id + "'");
  }

  std::optional<std::string> spec_text;
  std::optional<std::string> source;
  for (const auto& e : bundle.events) {
    if (!e.payload_hash) continue;
    auto it = bundle.artifacts.find(*e.payload_hash);
    if (it == bundle.artifacts.end()) {
      throw Error(ErrorKind::integrity, "event " + std::to_string(e.seq) + " payload is missing from the bundle");
    }
    if (e.action == Action::spec_loaded) spec_text = it->second;
    if (e.action == Action::ask_function || e.action == Action::regenerate_function) {
      source = it->second;
      v.function_version = v.function_version.value_or(0) + 1;
    }
  }
  if (!spec_text) throw Error(ErrorKind::integrity, "bundle has no spec snapshot");
  if (!source) {
    v.skipped = "session produced no function";
    return v;
  }
  if (task.reference_tests.empty()) {
    v.skipped = "task has no reference tests";
    return v;
  }
  auto spec = parse_spec(*spec_text);
  auto suite = reference_suite(task, spec.function_name());
  auto fn = FunctionArtifact::make(*v.function_version, *source, suite.suite_version);
  v.report = execute(suite, fn, profile, limits);
  return v;
}

json to_json(const ReferenceValidation& v) {
  json j = {{"session_id", v.session_id},
            {"task_id", v.task_id},
            {"function_version", v.function_version ? json(*v.function_version) : json(nullptr)}};
  if (v.skipped) {
    j["skipped"] = *v.skipped;
    return j;
  }
  j["report"] = to_json(v.report);
  j["passed"] = v.report.pass_count;
  j["total"] = v.report.total_count;
  j["all_pass"] = v.report.all_pass();
  return j;
}

}  // namespace specloop
