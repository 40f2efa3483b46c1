#include <doctest.h>

#include <fstream>

#include "specloop/bundle.hpp"
#include "specloop/error.hpp"
#include "specloop/hashing.hpp"
#include "support.hpp"

using namespace specloop;
using testsupport::EngineRig;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("specloop_unit_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

// Happy path: produce, explain, regenerate one test, ask -> all pass.
void run_happy(EngineRig& rig) {
  const auto suite = rig->produce_suite();
  rig.at(60);
  CurationAction explain;
  explain.kind = CurationKind::explain;
  explain.target_test_id = suite.tests[0].test_id;
  rig->curate(explain);
  rig.at(120);
  CurationAction regen;
  regen.kind = CurationKind::regenerate_test;
  regen.target_test_id = suite.tests[1].test_id;
  regen.guidance = "cover negative inputs";
  rig->curate(regen);
  rig.at(412);
  REQUIRE(rig->ask_function().all_pass());
}

ParticipantProfile profile_with(std::string free_text) {
  ParticipantProfile p;
  p.participant_id = "P-0123456789ab";
  p.programming_experience_years = 3;
  p.post_task = PostTaskFeedback{{4, 5}, std::move(free_text)};
  return p;
}

bool mentions(const VerifyResult& r, const std::string& needle) {
  for (const auto& p : r.problems) {
    if (p.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("bundle") {
  TEST_CASE("export of a completed session verifies and closes over its hashes") {
    EngineRig rig("happy_path");
    run_happy(rig);
    const auto dir = fresh_dir("bundle_ok");
    export_bundle(*rig, dir, testsupport::t0() + Millis{500'000});
    for (const auto* f : {"events.jsonl", "session.json", "metrics.csv", "profile.json"}) {
      CHECK(std::filesystem::exists(dir / f));
    }
    const auto b = read_bundle(dir);
    for (const auto& e : b.events) {
      if (e.payload_hash) CHECK(std::filesystem::exists(dir / "artifacts" / (*e.payload_hash + ".txt")));
    }
    for (const auto& [hash, text] : b.artifacts) CHECK(sha256_hex(text) == hash);
    CHECK(b.metrics_csv.substr(0, b.metrics_csv.find('\n')) == metrics_csv_header());
    const auto verdict = verify_bundle(dir);
    for (const auto& p : verdict.problems) MESSAGE(p);
    CHECK(verdict.ok());
  }

  TEST_CASE("metrics recomputed from the bundle match the live session") {
    EngineRig rig("happy_path");
    run_happy(rig);
    const auto dir = fresh_dir("bundle_metrics");
    export_bundle(*rig, dir, testsupport::t0());
    const auto m = metrics_from_bundle(read_bundle(dir));
    CHECK(m.time_to_pass == 412.0);
    CHECK(m.test_edits == rig->counters().test_edits);
    CHECK(m.iterations_to_pass == 1);
    CHECK(m.total_tokens == rig->counters().tokens.total());
    CHECK(m.pass_all == 1);
  }

  TEST_CASE("a flipped artifact byte is reported") {
    EngineRig rig("happy_path");
    run_happy(rig);
    const auto dir = fresh_dir("bundle_tamper");
    export_bundle(*rig, dir, testsupport::t0());
    const auto file = std::filesystem::directory_iterator(dir / "artifacts")->path();
    auto bytes = read_text_file(file);
    REQUIRE_FALSE(bytes.empty());
    bytes[0] = static_cast<char>(bytes[0] ^ 0x01);
    write_file_atomic(file, bytes);
    const auto verdict = verify_bundle(dir);
    CHECK_FALSE(verdict.ok());
    CHECK(mentions(verdict, "mismatch"));
  }

  TEST_CASE("a missing artifact and a gap in the log are reported") {
    EngineRig rig("happy_path");
    run_happy(rig);
    const auto dir = fresh_dir("bundle_gap");
    export_bundle(*rig, dir, testsupport::t0());
    const auto b = read_bundle(dir);
    std::filesystem::remove(dir / "artifacts" / (*b.events[1].payload_hash + ".txt"));
    auto events = b.events;
    events.erase(events.begin() + 2);
    write_file_atomic(dir / "events.jsonl", to_jsonl(events));
    const auto verdict = verify_bundle(dir);
    CHECK(mentions(verdict, "seq"));
    CHECK(mentions(verdict, b.events[1].payload_hash->substr(0, 12)));
  }

  TEST_CASE("re-export changes only the export time") {
    EngineRig rig("happy_path");
    run_happy(rig);
    const auto a = fresh_dir("bundle_a");
    const auto b = fresh_dir("bundle_b");
    export_bundle(*rig, a, testsupport::t0() + Millis{1});
    export_bundle(*rig, b, testsupport::t0() + Millis{2});
    for (const auto* f : {"events.jsonl", "metrics.csv", "profile.json"}) {
      CHECK(read_text_file(a / f) == read_text_file(b / f));
    }
    auto sa = nlohmann::json::parse(read_text_file(a / "session.json"));
    auto sb = nlohmann::json::parse(read_text_file(b / "session.json"));
    CHECK(sa["exported_at"] != sb["exported_at"]);
    sa.erase("exported_at");
    sb.erase("exported_at");
    CHECK(sa == sb);
  }

  TEST_CASE("an open session cannot be exported") {
    EngineRig rig("happy_path");
    rig->produce_suite();
    try {
      export_bundle(*rig, fresh_dir("bundle_open"), testsupport::t0());
      FAIL("expected rejection");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::rejected);
    }
  }

  TEST_CASE("identifiers are allowed only in flagged free text") {
    EngineRig rig("happy_path");
    rig->set_profile(profile_with("write to me at someone@example.org"));
    run_happy(rig);
    const auto dir = fresh_dir("bundle_ident");
    export_bundle(*rig, dir, testsupport::t0());
    CHECK(verify_bundle(dir).ok());

    const std::string leaked = "contact: someone@example.org\n";
    write_file_atomic(dir / "artifacts" / (sha256_hex(leaked) + ".txt"), leaked);
    const auto verdict = verify_bundle(dir);
    CHECK_FALSE(verdict.ok());
    CHECK(mentions(verdict, "identifier"));
    VerifyOptions none;
    none.identifier_patterns.clear();
    CHECK(verify_bundle(dir, none).ok());
  }

  TEST_CASE("an edited metrics row no longer matches the log") {
    EngineRig rig("happy_path");
    run_happy(rig);
    const auto dir = fresh_dir("bundle_metrics_edit");
    export_bundle(*rig, dir, testsupport::t0());
    auto csv = read_text_file(dir / "metrics.csv");
    const auto pos = csv.find(",1,1.000000,");
    REQUIRE(pos != std::string::npos);
    csv.replace(pos, 12, ",0,1.000000,");
    write_file_atomic(dir / "metrics.csv", csv);
    CHECK(mentions(verify_bundle(dir), "metrics"));
  }

  TEST_CASE("reading a bundle that is not there") {
    try {
      read_bundle(fresh_dir("bundle_missing"));
      FAIL("expected storage error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::storage);
    }
  }
}
