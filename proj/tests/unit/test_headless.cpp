#include <doctest.h>

#include "specloop/error.hpp"
#include "specloop/headless.hpp"
#include "support.hpp"

using namespace specloop;
using nlohmann::json;

namespace {

HeadlessOptions options_for(const std::string& scenario, const std::string& out) {
  HeadlessOptions o;
  o.backend = testsupport::scenario_backend(scenario);
  o.executor = testsupport::fake_executor();
  o.out_dir = std::filesystem::temp_directory_path() / ("specloop_unit_headless_" + out);
  std::filesystem::remove_all(o.out_dir);
  return o;
}

HeadlessScript script(const std::string& name) {
  return load_script(testsupport::fixtures() / "scripts" / (name + ".json"));
}

json minimal_script(json steps) {
  return {{"session_id", "x"}, {"participant_id", "P-0123456789ab"}, {"task_id", "w-sum"},
          {"spec", "../specs/two_sum.toml"}, {"steps", std::move(steps)}};
}

}  // namespace

TEST_SUITE("headless") {
  TEST_CASE("happy path ends in a passing bundle") {
    const auto r = headless_run(script("happy_path"), options_for("happy_path", "happy"));
    CHECK(r.final_phase == Phase::completed);
    CHECK(r.metrics.pass_all == 1);
    CHECK(r.metrics.time_to_pass == 412.0);
    CHECK(std::filesystem::exists(r.bundle_dir / "events.jsonl"));
  }

  TEST_CASE("asking for a function first fails at step 0") {
    auto s = parse_script(minimal_script({{{"at", 0}, {"do", "ask_function"}}}),
                          testsupport::fixtures() / "scripts");
    try {
      headless_run(s, options_for("happy_path", "early_ask"));
      FAIL("expected a precondition error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::precondition);
      CHECK(std::string(e.what()).rfind("step 0", 0) == 0);
    }
  }

  TEST_CASE("the same script twice gives identical rows and logs") {
    const auto a = headless_run(script("mixed"), options_for("mixed", "twice_a"));
    const auto b = headless_run(script("mixed"), options_for("mixed", "twice_b"));
    CHECK(metrics_csv_row(a.metrics) == metrics_csv_row(b.metrics));
    CHECK(read_text_file(a.bundle_dir / "events.jsonl") == read_text_file(b.bundle_dir / "events.jsonl"));
  }

  TEST_CASE("debounced steps are skipped and counted") {
    const auto r = headless_run(script("debounced_clicks"), options_for("debounced_clicks", "debounce"));
    CHECK(r.debounced_steps == 2);
    CHECK(r.metrics.test_edits == 2);
  }

  TEST_CASE("an open session is closed after the last step") {
    const auto r = headless_run(script("closed_early"), options_for("closed_early", "closed"));
    CHECK(r.final_phase == Phase::expired);
    CHECK(r.metrics.flags.interrupted_outlier);
    CHECK(r.metrics.time_to_pass == 2400.0);
  }

  TEST_CASE("script validation") {
    const auto base = testsupport::fixtures() / "scripts";
    CHECK_THROWS_AS(parse_script(minimal_script({{{"at", 0}, {"do", "dance"}}}), base), Error);
    CHECK_THROWS_AS(parse_script(minimal_script({{{"at", 5}, {"do", "produce_suite"}},
                                                 {{"at", 1}, {"do", "produce_suite"}}}),
                                 base),
                    Error);
    CHECK_THROWS_AS(parse_script(minimal_script({{{"at", 0}, {"do", "produce_suite"}, {"colour", "red"}}}), base),
                    Error);
    auto no_spec = minimal_script(json::array());
    no_spec.erase("spec");
    CHECK_THROWS_AS(parse_script(no_spec, base), Error);
  }

  TEST_CASE("unknown test selectors abort the run") {
    auto s = parse_script(minimal_script({{{"at", 0}, {"do", "produce_suite"}},
                                          {{"at", 5}, {"do", "delete_test"}, {"test", "17"}}}),
                          testsupport::fixtures() / "scripts");
    CHECK_THROWS_WITH_AS(headless_run(s, options_for("happy_path", "bad_selector")), doctest::Contains("step 1"),
                         Error);
  }
}
