#include <doctest.h>

#include "specloop/error.hpp"
#include "specloop/session_engine.hpp"
#include "support.hpp"

using namespace specloop;
using testsupport::EngineRig;

namespace {

ErrorKind error_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::parse;
}

size_t count(const SessionEngine& s, Action a) {
  size_t n = 0;
  for (const auto& e : s.log().events()) n += e.action == a;
  return n;
}

CurationAction on(CurationKind kind, const std::string& test_id, std::optional<std::string> guidance = {}) {
  CurationAction a;
  a.kind = kind;
  a.target_test_id = test_id;
  a.guidance = std::move(guidance);
  return a;
}

}  // namespace

TEST_SUITE("session_engine") {
  TEST_CASE("initial state logs start and spec") {
    EngineRig rig("happy_path");
    CHECK(rig->state().phase == Phase::spec_loaded);
    REQUIRE(rig->log().events().size() == 2);
    CHECK(rig->log().events()[0].action == Action::session_start);
    CHECK(rig->log().events()[1].action == Action::spec_loaded);
    CHECK(rig->log().events()[1].payload_hash == rig->state().spec.source_hash());
  }

  TEST_CASE("first production is version 1, a second is version 2") {
    EngineRig rig("suite_regens");
    rig.at(3);
    const auto s1 = rig->produce_suite();
    CHECK(s1.suite_version == 1);
    CHECK(s1.size() == 5);
    CHECK(rig->state().first_suite_at == testsupport::t0() + Millis{3000});
    CHECK(rig->state().phase == Phase::suite_produced);
    rig.at(10);
    CHECK(rig->produce_suite().suite_version == 2);
    CHECK(rig->state().first_suite_at == testsupport::t0() + Millis{3000});
    CHECK(rig->counters().suite_productions == 2);
    CHECK(count(*rig, Action::produce_suite) == 2);
  }

  TEST_CASE("a call after expiry fails and only the session end is logged") {
    EngineRig rig("happy_path", Millis{60'000});
    rig.at(1);
    rig->produce_suite();
    const auto before = rig->log().events().size();
    rig.at(60);
    CHECK(error_kind([&] { rig->ask_function(); }) == ErrorKind::budget_expired);
    REQUIRE(rig->log().events().size() == before + 1);
    CHECK(rig->log().events().back().action == Action::session_end);
    CHECK(rig->state().phase == Phase::expired);
    CHECK(rig->state().outcome == SessionOutcome::budget_expired);
    CHECK(error_kind([&] { rig->produce_suite(); }) == ErrorKind::budget_expired);
    CHECK(rig->log().events().size() == before + 1);
  }

  TEST_CASE("delete removes one test and bumps the version") {
    EngineRig rig("curation_heavy");
    const auto suite = rig->produce_suite();
    REQUIRE(suite.size() == 5);
    rig.at(5);
    const auto r = rig->curate(on(CurationKind::delete_test, suite.tests[2].test_id));
    CHECK(r.suite.size() == 4);
    CHECK(r.suite.suite_version == suite.suite_version + 1);
    CHECK_FALSE(r.suite.find(suite.tests[2].test_id));
    CHECK(rig->state().phase == Phase::curating);
  }

  TEST_CASE("explain leaves the suite alone") {
    EngineRig rig("happy_path");
    const auto suite = rig->produce_suite();
    rig.at(5);
    const auto r = rig->curate(on(CurationKind::explain, suite.tests[0].test_id));
    CHECK(r.suite == suite);
    CHECK(rig->state().suite == suite);
    REQUIRE(r.explanation.has_value());
    CHECK(r.explanation->find("2 + 7 = 9") != std::string::npos);
    CHECK(count(*rig, Action::explain_test) == 1);
  }

  TEST_CASE("regenerating one test replaces it in place") {
    EngineRig rig("happy_path");
    const auto suite = rig->produce_suite();
    rig.at(5);
    const auto r =
        rig->curate(on(CurationKind::regenerate_test, suite.tests[1].test_id, std::string("cover negative inputs")));
    CHECK(r.suite.size() == suite.size());
    CHECK(r.suite.tests[1].test_id != suite.tests[1].test_id);
    CHECK(r.suite.tests[1].name == "test_negative_pair");
    CHECK(r.suite.tests[1].origin == TestOrigin::regenerated);
    CHECK(r.suite.tests[0] == suite.tests[0]);
  }

  TEST_CASE("edit replaces the body and derives the name") {
    EngineRig rig("edit_then_pass");
    const auto suite = rig->produce_suite();
    CurationAction edit = on(CurationKind::edit_test, suite.tests[1].test_id);
    edit.body = "def test_edited_pair(self):\n    self.assertEqual(two_sum([4, 6], 10), [0, 1])\n";
    rig.at(5);
    const auto r = rig->curate(edit);
    CHECK(r.suite.tests[1].name == "test_edited_pair");
    CHECK(r.suite.tests[1].origin == TestOrigin::user_edited);
    CHECK(rig->counters().test_edits == 1);
    edit.target_test_id = r.suite.tests[0].test_id;
    rig.at(10);
    CHECK(error_kind([&] { rig->curate(edit); }) == ErrorKind::validation);  // duplicate body
  }

  TEST_CASE("curation validation") {
    EngineRig rig("happy_path");
    rig->produce_suite();
    CHECK(error_kind([&] { rig->curate(on(CurationKind::explain, "no-such-test")); }) == ErrorKind::not_found);
    CurationAction missing;
    missing.kind = CurationKind::delete_test;
    CHECK(error_kind([&] { missing.validate(); }) == ErrorKind::validation);
    CurationAction suite_with_target = on(CurationKind::regenerate_suite, "x");
    CHECK(error_kind([&] { suite_with_target.validate(); }) == ErrorKind::validation);
  }

  TEST_CASE("all five passing completes the session on the first generation") {
    EngineRig rig("happy_path");
    rig->produce_suite();
    rig.at(30);
    const auto report = rig->ask_function();
    CHECK(report.pass_count == 5);
    CHECK(rig->state().phase == Phase::completed);
    CHECK(rig->state().outcome == SessionOutcome::all_pass);
    CHECK(rig->counters().generations_to_first_pass == 1u);
    CHECK(rig->log().events().back().action == Action::session_end);
    CHECK(rig->log().closed());
  }

  TEST_CASE("two failures out of five leave the session executed") {
    EngineRig rig("never_pass");
    rig->produce_suite();
    rig.at(30);
    const auto report = rig->ask_function();
    CHECK(report.pass_count == 3);
    CHECK(report.total_count == 5);
    CHECK(rig->state().phase == Phase::executed);
    CHECK(rig->state().outcome == SessionOutcome::pending);
  }

  TEST_CASE("function generation needs a suite") {
    EngineRig rig("happy_path");
    CHECK(error_kind([&] { rig->ask_function(); }) == ErrorKind::precondition);
    CHECK(error_kind([&] { rig->regenerate_function(false); }) == ErrorKind::precondition);
    CHECK(error_kind([&] { rig->view_function(); }) == ErrorKind::precondition);
    CHECK(count(*rig, Action::ask_function) == 0);
  }

  TEST_CASE("advice on failures, counted once per request") {
    EngineRig rig("advice_three");
    rig->produce_suite();
    rig.at(10);
    rig->ask_function();
    for (int i = 0; i < 3; ++i) {
      rig.at(20 + i);
      CHECK(rig->request_advice().find("empty list") != std::string::npos);
    }
    CHECK(rig->counters().advice_triggers == 3);
    CHECK(count(*rig, Action::advice_generated) == 3);
    rig.at(30);
    CHECK(rig->regenerate_function(true).all_pass());
    CHECK(error_kind([&] { rig->request_advice(); }) == ErrorKind::precondition);
  }

  TEST_CASE("advice needs a failing report") {
    EngineRig rig("advice_three");
    rig->produce_suite();
    CHECK(error_kind([&] { rig->request_advice(); }) == ErrorKind::precondition);
  }

  TEST_CASE("regenerating with advice that was never generated") {
    EngineRig rig("never_pass");
    rig->produce_suite();
    rig.at(10);
    rig->ask_function();
    rig.at(20);
    CHECK(error_kind([&] { rig->regenerate_function(true); }) == ErrorKind::precondition);
  }

  TEST_CASE("two regenerations then a pass is three iterations") {
    EngineRig rig("regen_twice");
    rig->produce_suite();
    rig.at(30);
    rig->ask_function();
    rig.at(60);
    CHECK_FALSE(rig->regenerate_function(false).all_pass());
    rig.at(90);
    CHECK(rig->regenerate_function(false).all_pass());
    CHECK(rig->counters().function_generations == 3);
    CHECK(rig->counters().generations_to_first_pass == 3u);
    CHECK(rig->state().function->function_version == 3);
  }

  TEST_CASE("regeneration after expiry") {
    EngineRig rig("regen_twice", Millis{100'000});
    rig->produce_suite();
    rig.at(30);
    rig->ask_function();
    rig.at(100);
    CHECK(error_kind([&] { rig->regenerate_function(false); }) == ErrorKind::budget_expired);
  }

  TEST_CASE("budget boundary is closed") {
    EngineRig rig("happy_path", Millis{2400'000});
    CHECK(rig->tick_budget(testsupport::t0() + Millis{2399'000}) == Phase::spec_loaded);
    CHECK(rig->remaining_budget() == Millis{2400'000});
    CHECK(rig->tick_budget(testsupport::t0() + Millis{2400'000}) == Phase::expired);
    CHECK(rig->state().end_reason == "budget");
  }

  TEST_CASE("a completed session never expires") {
    EngineRig rig("happy_path", Millis{60'000});
    rig->produce_suite();
    rig.at(30);
    rig->ask_function();
    REQUIRE(rig->state().phase == Phase::completed);
    const auto events = rig->log().events().size();
    CHECK(rig->tick_budget(testsupport::t0() + Millis{10'000'000}) == Phase::completed);
    CHECK(rig->log().events().size() == events);
    CHECK(rig->state().outcome == SessionOutcome::all_pass);
  }

  TEST_CASE("duplicate clicks inside the window are refused") {
    EngineRig rig("happy_path");
    const auto suite = rig->produce_suite();
    rig.at(10);
    rig->curate(on(CurationKind::explain, suite.tests[0].test_id));
    rig.clock->advance(Millis{100});
    CHECK(error_kind([&] { rig->curate(on(CurationKind::explain, suite.tests[0].test_id)); }) ==
          ErrorKind::debounced);
    CHECK(count(*rig, Action::explain_test) == 1);
    rig.clock->advance(Millis{400});
    rig->curate(on(CurationKind::explain, suite.tests[0].test_id));
    CHECK(count(*rig, Action::explain_test) == 2);
  }

  TEST_CASE("versions only grow") {
    EngineRig rig("curation_heavy");
    std::uint64_t last = 0;
    auto check = [&] {
      CHECK(rig->state().suite.suite_version >= last);
      last = rig->state().suite.suite_version;
    };
    const auto suite = rig->produce_suite();
    check();
    rig.at(10);
    rig->curate(on(CurationKind::delete_test, suite.tests[0].test_id));
    check();
    rig.at(20);
    rig->curate(on(CurationKind::regenerate_test, rig->state().suite.tests[0].test_id));
    check();
    rig.at(30);
    rig->curate(on(CurationKind::explain, rig->state().suite.tests[0].test_id));
    check();
  }

  TEST_CASE("close marks an interruption and freezes the session") {
    EngineRig rig("closed_early");
    rig->produce_suite();
    rig.at(20);
    rig->close();
    CHECK(rig->state().phase == Phase::expired);
    CHECK(rig->log().events().back().target == "closed");
    CHECK(error_kind([&] { rig->produce_suite(); }) == ErrorKind::budget_expired);
  }

  TEST_CASE("a failing executor leaves the phase unchanged") {
    EngineRig rig("happy_path", Millis{2400'000}, [](const TestSuite&, const FunctionArtifact&) -> ExecutionReport {
      throw Error(ErrorKind::harness, "runner crashed");
    });
    rig->produce_suite();
    rig.at(10);
    CHECK(error_kind([&] { rig->ask_function(); }) == ErrorKind::harness);
    CHECK(rig->state().phase == Phase::suite_produced);
    CHECK(count(*rig, Action::run_tests) == 0);
  }

  TEST_CASE("the live counters agree with the log") {
    EngineRig rig("mixed");
    rig->produce_suite();
    rig.at(10);
    CurationAction regen;
    regen.kind = CurationKind::regenerate_suite;
    regen.guidance = "cover empty input";
    rig->curate(regen);
    rig.at(20);
    rig->curate(on(CurationKind::explain, rig->state().suite.tests[0].test_id));
    rig.at(30);
    rig->ask_function();
    rig.at(40);
    rig->request_advice();
    CHECK(rig->counters().test_edits == 1);
    CHECK(rig->counters().suite_productions == 2);
    CHECK(count(*rig, Action::regenerate_suite) == 1);
    CHECK(rig->counters().advice_triggers == 1);
    CHECK(rig->counters().tokens == rig->gateway().totals());
  }

  TEST_CASE("curation kind names") {
    CHECK(parse_curation_kind("regenerate") == CurationKind::regenerate_test);
    CHECK(parse_curation_kind("explain") == CurationKind::explain);
    CHECK(to_string(Phase::function_generated) == "function_generated");
    CHECK_THROWS_AS(parse_curation_kind("rename"), Error);
  }
}
