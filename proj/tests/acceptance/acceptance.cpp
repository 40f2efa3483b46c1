// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "specloop/bundle.hpp"
#include "specloop/error.hpp"
#include "specloop/hashing.hpp"
#include "specloop/headless.hpp"
#include "specloop/llm_gateway.hpp"
#include "specloop/metrics.hpp"
#include "specloop/session_engine.hpp"
#include "specloop/stats.hpp"
#include "specloop/task_bank.hpp"

namespace fs = std::filesystem;
using namespace specloop;

namespace {

const fs::path kFixtures = SPECLOOP_FIXTURES;

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "specloop_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Collects the reasons a criterion failed; empty means pass.
struct Check {
  std::vector<std::string> failures;
  std::string note;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  template <class A, class B>
  void equal(const A& actual, const B& expected, const std::string& what) {
    if (!(actual == expected)) {
      std::ostringstream os;
      os << what << ": got " << actual << ", expected " << expected;
      failures.push_back(os.str());
    }
  }
};

int failed_criteria = 0;

void criterion(const std::string& name, const std::function<void(Check&)>& body) {
  Check c;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool ok = c.failures.empty();
  if (!ok) ++failed_criteria;
  std::cout << (ok ? "PASS" : "FAIL") << "  " << name;
  std::cout << "  (" << std::fixed;
  std::cout.precision(2);
  std::cout << secs << " s" << (c.note.empty() ? "" : "; " + c.note) << ")\n";
  for (const auto& f : c.failures) std::cout << "        - " << f << "\n";
  std::cout.flush();
}

/// Replays a fixture scenario through the real harness and returns the
/// bundle directory.
fs::path replay_scenario(const std::string& name, const fs::path& out) {
  HeadlessOptions o;
  o.backend = std::make_shared<ReplayBackend>(kFixtures / "replay" / name);
  o.out_dir = out;
  const auto r = headless_run(load_script(kFixtures / "scripts" / (name + ".json")), o);
  return r.bundle_dir;
}

std::string shell_quote(const std::string& s) { return "'" + s + "'"; }

// ---------------------------------------------------------------------------
// Brute-force oracles, written from the definitions and sharing no code with
// the library.

std::set<std::string> oracle_tokens(const std::string& body, const std::set<std::string>& ignored) {
  std::set<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !ignored.count(cur)) out.insert(cur);
    cur.clear();
  };
  for (char ch : body) {
    const bool word = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '_';
    if (word) {
      cur += ch;
    } else {
      flush();
    }
  }
  flush();
  return out;
}

double oracle_diversity(const std::vector<std::string>& bodies, const std::set<std::string>& ignored) {
  if (bodies.size() < 2) return 0.0;
  std::vector<std::set<std::string>> sets;
  for (const auto& b : bodies) sets.push_back(oracle_tokens(b, ignored));
  long double total = 0;
  size_t pairs = 0;
  for (size_t i = 0; i < sets.size(); ++i) {
    for (size_t j = i + 1; j < sets.size(); ++j) {
      size_t inter = 0;
      for (const auto& t : sets[i]) inter += sets[j].count(t);
      const size_t uni = sets[i].size() + sets[j].size() - inter;
      total += uni == 0 ? 1.0L : static_cast<long double>(inter) / uni;
      ++pairs;
    }
  }
  return static_cast<double>(1.0L - total / pairs);
}

// Type-7 quantile as the piecewise-linear curve through the points
// (i / (n - 1), x_(i)), located by scanning segments.
double oracle_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n == 1) return v[0];
  for (size_t i = 0; i + 1 < n; ++i) {
    const long double lo = static_cast<long double>(i) / (n - 1);
    const long double hi = static_cast<long double>(i + 1) / (n - 1);
    if (p >= lo && p <= hi) {
      const long double frac = (p - lo) / (hi - lo);
      return static_cast<double>(v[i] + frac * (static_cast<long double>(v[i + 1]) - v[i]));
    }
  }
  return v.back();
}

double oracle_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

// Average rank = 1 + (#smaller) + (#equal - 1) / 2.
std::vector<long double> oracle_ranks(const std::vector<double>& v) {
  std::vector<long double> r(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    size_t less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = 1.0L + less + (equal - 1) / 2.0L;
  }
  return r;
}

std::optional<double> oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = oracle_ranks(x), ry = oracle_ranks(y);
  const long double n = x.size();
  long double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  long double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// ---------------------------------------------------------------------------
// State-machine exploration.

constexpr const char* kSuite = R"(```python
import unittest


class T(unittest.TestCase):
    def test_pair(self):
        self.assertEqual(two_sum([2, 7], 9), [0, 1])

    def test_dupes(self):
        self.assertEqual(two_sum([3, 3], 6), [0, 1])

    def test_missing(self):
        self.assertEqual(two_sum([1], 5), [])
```)";

/// Deterministic per request: each kind has one answer, single tests are
/// named after the prompt hash so regenerations never collide.
class StubBackend final : public Backend {
 public:
  GenerationResult generate(const GenerationRequest& r) override {
    GenerationResult out;
    out.backend_id = "stub";
    switch (r.kind) {
      case GenerationKind::suite: out.output_text = kSuite; break;
      case GenerationKind::single_test:
        out.output_text = "```python\ndef test_r" + sha256_hex(r.prompt).substr(0, 10) +
                          "(self):\n    self.assertEqual(two_sum([4, 5], 9), [0, 1])\n```";
        break;
      case GenerationKind::explain_test: out.output_text = "It checks one pair."; break;
      case GenerationKind::function: out.output_text = "```python\ndef two_sum(nums, target):\n    pass\n```"; break;
      case GenerationKind::regenerate_function:
        out.output_text = "```python\ndef two_sum(nums, target):\n    return []\n```";
        break;
      case GenerationKind::advice: out.output_text = "Return an empty list."; break;
    }
    out.prompt_tokens = 1;
    out.completion_tokens = 1;
    return out;
  }
  std::string id() const override { return "stub"; }
};

/// Tests mentioning an empty expected list pass only against a function
/// that returns one.
ExecutionReport stub_executor(const TestSuite& suite, const FunctionArtifact& fn) {
  std::vector<TestResult> results;
  const bool returns_empty = fn.source.find("return []") != std::string::npos;
  for (const auto& t : suite.tests) {
    const bool wants_empty = t.body.find(", [])") != std::string::npos;
    results.push_back({t.test_id, !wants_empty || returns_empty ? Outcome::pass : Outcome::fail,
                       std::nullopt});
  }
  return make_report(std::move(results), std::nullopt, suite.suite_version, fn.function_version);
}

enum class Act {
  produce,
  regenerate_suite,
  explain,
  regenerate_test,
  delete_test,
  edit_test,
  ask,
  regenerate_fn,
  regenerate_fn_advice,
  advice,
  view,
  close,
  expire,
};
constexpr int kActs = 13;

struct Explorer {
  std::shared_ptr<VirtualClock> clock = std::make_shared<VirtualClock>(parse_timestamp("2025-01-01T00:00:00Z"));
  std::shared_ptr<Gateway> gateway = std::make_shared<Gateway>(std::make_shared<StubBackend>(), GenerationParams{});
  Millis budget{3'600'000};
  std::size_t nodes = 0;
  std::size_t pruned = 0;
  std::vector<std::string> violations;

  static std::string fingerprint(const SessionEngine& e) {
    const auto& s = e.state();
    std::string fp = to_jsonl(e.log().events());
    fp += to_string(s.phase);
    fp += to_json(s.suite).dump();
    fp += s.function ? s.function->source_hash + std::to_string(s.function->function_version) : "-";
    fp += s.latest_advice.value_or("-");
    fp += std::to_string(e.reports().size());
    return fp;
  }

  void apply(SessionEngine& e, Act a, int depth) {
    const auto& tests = e.state().suite.tests;
    const std::string first = tests.empty() ? std::string("none") : tests.front().test_id;
    CurationAction c;
    c.target_test_id = first;
    switch (a) {
      case Act::produce: e.produce_suite(); break;
      case Act::regenerate_suite:
        c.kind = CurationKind::regenerate_suite;
        c.target_test_id.reset();
        e.curate(c);
        break;
      case Act::explain: c.kind = CurationKind::explain; e.curate(c); break;
      case Act::regenerate_test: c.kind = CurationKind::regenerate_test; e.curate(c); break;
      case Act::delete_test: c.kind = CurationKind::delete_test; e.curate(c); break;
      case Act::edit_test:
        c.kind = CurationKind::edit_test;
        c.body = "def test_e" + std::to_string(depth) + "(self):\n    self.assertEqual(two_sum([1, 1], 2), [0, 1])\n";
        e.curate(c);
        break;
      case Act::ask: e.ask_function(); break;
      case Act::regenerate_fn: e.regenerate_function(false); break;
      case Act::regenerate_fn_advice: e.regenerate_function(true); break;
      case Act::advice: e.request_advice(); break;
      case Act::view: e.view_function(); break;
      case Act::close: e.close(); break;
      case Act::expire: e.tick_budget(e.state().started_at + budget); break;
    }
  }

  static bool generated_before_suite(const SessionEngine& e) {
    bool produced = false;
    for (const auto& ev : e.log().events()) {
      if (ev.action == Action::produce_suite) produced = true;
      if ((ev.action == Action::ask_function || ev.action == Action::regenerate_function) && !produced) return true;
    }
    return false;
  }

  void explore(const SessionEngine& parent, int depth, int max_depth, std::vector<Act>& path) {
    if (depth == max_depth) return;
    const auto before = fingerprint(parent);
    for (int i = 0; i < kActs; ++i) {
      ++nodes;
      SessionEngine e = parent;
      // One second per step keeps every action outside the duplicate window.
      clock->set(e.state().started_at + Millis{1000} * (depth + 1));
      path.push_back(static_cast<Act>(i));
      bool threw = false;
      try {
        apply(e, static_cast<Act>(i), depth);
      } catch (const Error&) {
        threw = true;
      }
      const auto after = fingerprint(e);
      auto where = [&] {
        std::string s;
        for (auto a : path) s += std::to_string(static_cast<int>(a)) + " ";
        return s;
      };
      if (parent.terminal() && after != before) violations.push_back("terminal session mutated by: " + where());
      if (generated_before_suite(e)) violations.push_back("function generated before a suite by: " + where());
      if (e.state().function && !e.state().first_suite_at) violations.push_back("function without suite: " + where());
      for (size_t k = 0; k < e.log().events().size(); ++k) {
        if (e.log().events()[k].seq != k + 1) violations.push_back("seq gap after: " + where());
      }
      // A refused action, or any action on a terminal session, leaves the
      // state as it was; its continuations are exactly the parent's, which
      // this loop already covers.
      if ((threw || parent.terminal()) && after == before) {
        ++pruned;
      } else if (!threw || after != before) {
        explore(e, depth + 1, max_depth, path);
      }
      path.pop_back();
    }
  }
};

}  // namespace

int main() {
  const auto fixtures_ok = fs::exists(kFixtures / "replay" / "happy_path");
  if (!fixtures_ok) {
    std::cerr << "fixtures not found under " << kFixtures << "\n";
    return 2;
  }
  std::vector<fs::path> exported;

  criterion("replay determinism: happy path twice via run-script gives identical log and metrics", [&](Check& c) {
#ifdef SPECLOOP_CLI
    const auto start = std::chrono::steady_clock::now();
    std::vector<fs::path> dirs;
    for (const char* tag : {"a", "b"}) {
      const auto out = scratch(std::string("determinism_") + tag);
      const std::string cmd = shell_quote(SPECLOOP_CLI) + " run-script " +
                              shell_quote((kFixtures / "scripts" / "happy_path.json").string()) + " --fixtures " +
                              shell_quote((kFixtures / "replay" / "happy_path").string()) + " --out " +
                              shell_quote(out.string()) + " > /dev/null";
      c.equal(std::system(cmd.c_str()), 0, std::string("run-script exit status (run ") + tag + ")");
      dirs.push_back(out / "happy_path");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto ev_a = read_text_file(dirs[0] / "events.jsonl");
    const auto ev_b = read_text_file(dirs[1] / "events.jsonl");
    c.expect(!ev_a.empty() && ev_a == ev_b, "events.jsonl differs between runs");
    c.expect(read_text_file(dirs[0] / "metrics.csv") == read_text_file(dirs[1] / "metrics.csv"),
             "metrics.csv differs between runs");
    c.expect(secs < 10.0, "two runs took " + std::to_string(secs) + " s");
    const auto row = parse_metrics_csv(read_text_file(dirs[0] / "metrics.csv"));
    c.expect(row.size() == 1 && row[0].pass_all == 1, "happy path did not pass");
    exported.push_back(dirs[0]);
    c.note = "run-script x2 in " + std::to_string(secs).substr(0, 4) + " s";
#else
    c.expect(false, "built without the command-line tool");
#endif
  });

  std::map<std::string, SessionMetrics> replayed;
  const auto replay_root = scratch("scenarios");
  for (const auto& entry : fs::directory_iterator(kFixtures / "replay")) {
    const auto name = entry.path().filename().string();
    try {
      const auto dir = replay_scenario(name, replay_root);
      exported.push_back(dir);
      replayed[name] = metrics_from_bundle(read_bundle(dir));
    } catch (const std::exception& e) {
      std::cout << "note: scenario " << name << " failed to replay: " << e.what() << "\n";
    }
  }

  criterion("metric capping: never-passing session with a 2400 s budget", [&](Check& c) {
    c.expect(replayed.count("never_pass") == 1, "never_pass scenario missing");
    const auto& m = replayed.at("never_pass");
    c.equal(m.pass_all, 0, "PassAll");
    c.equal(m.time_to_pass, 2400.0, "TimeToPass");
    const auto row = metrics_csv_row(m);
    c.expect(row.find(",2400.000,") != std::string::npos, "csv row lacks 2400.000: " + row);
  });

  criterion("counter oracle: 10 scripted sessions match hand counts exactly", [&](Check& c) {
    struct Expected {
      std::size_t edits, suite_regens, advice, iterations;
      std::optional<double> ttp;
    };
    // Counted by hand from the step lists in tools/author_fixtures.py.
    const std::map<std::string, Expected> hand = {
        {"happy_path", {2, 0, 0, 1, 412.0}},      {"never_pass", {0, 0, 1, 2, 2400.0}},
        {"regen_twice", {0, 0, 0, 3, 90.0}},      {"advice_three", {0, 0, 3, 2, 30.0}},
        {"curation_heavy", {4, 0, 0, 1, 50.0}},   {"suite_regens", {0, 2, 0, 1, 30.0}},
        {"edit_then_pass", {1, 0, 0, 1, 30.0}},   {"debounced_clicks", {2, 0, 0, 1, 20.0}},
        {"closed_early", {1, 0, 0, 0, 2400.0}},   {"mixed", {2, 1, 1, 2, 60.0}},
    };
    for (const auto& [name, want] : hand) {
      if (!replayed.count(name)) {
        c.expect(false, name + " did not replay");
        continue;
      }
      const auto& m = replayed.at(name);
      c.equal(m.test_edits, want.edits, name + " TestEdits");
      c.equal(m.suite_regenerations, want.suite_regens, name + " SuiteRegenerations");
      c.equal(m.advice_triggers, want.advice, name + " AdviceTriggers");
      c.equal(m.iterations_to_pass, want.iterations, name + " IterationsToPass");
      if (want.ttp) c.equal(m.time_to_pass, *want.ttp, name + " TimeToPass");
    }
    c.note = std::to_string(hand.size()) + " sessions";
  });

  criterion("PassRate/PassAll: 7 of 10 passing and an all-pass fixture", [&](Check& c) {
    const auto& partial = replayed.at("partial_10");
    c.equal(partial.pass_rate, 0.7, "partial PassRate");
    c.equal(partial.pass_all, 0, "partial PassAll");
    c.expect(metrics_csv_row(partial).find(",0,0.700000,") != std::string::npos, "csv PassRate != 0.700000");
    const auto& happy = replayed.at("happy_path");
    c.equal(happy.pass_rate, 1.0, "all-pass PassRate");
    c.equal(happy.pass_all, 1, "all-pass PassAll");
  });

  criterion("diversity oracle: 20 random suites against pairwise Jaccard", [&](Check& c) {
    std::mt19937_64 rng(20240601);
    const std::vector<std::string> vocab = {"self", "assertEqual", "two_sum", "x", "y", "0", "1", "42",
                                            "nums", "target", "def", "test_a", "test_b", "None", "[]", "-7"};
    const std::vector<std::string> ignored_list = {"self", "assertEqual", "def"};
    const std::set<std::string> ignored(ignored_list.begin(), ignored_list.end());
    double worst = 0;
    for (int s = 0; s < 20; ++s) {
      const int n = std::uniform_int_distribution<int>(0, 7)(rng);
      std::vector<std::string> bodies;
      TestSuite suite;
      for (int i = 0; i < n; ++i) {
        std::string body;
        const int len = std::uniform_int_distribution<int>(0, 9)(rng);
        for (int k = 0; k < len; ++k) {
          body += vocab[std::uniform_int_distribution<size_t>(0, vocab.size() - 1)(rng)];
          body += " (,)\n"[std::uniform_int_distribution<int>(0, 4)(rng)];
        }
        bodies.push_back(body);
        suite.tests.push_back(TestCase::make("t", body, TestOrigin::generated, {}));
      }
      for (bool use_ignored : {false, true}) {
        const double lib = use_ignored ? test_diversity(suite, ignored_list) : test_diversity(suite);
        const double ref = oracle_diversity(bodies, use_ignored ? ignored : std::set<std::string>{});
        worst = std::max(worst, std::abs(lib - ref));
      }
    }
    c.expect(worst <= 1e-12, "max |diff| = " + std::to_string(worst));
    std::ostringstream os;
    os << "max |diff| " << worst;
    c.note = os.str();
  });

  criterion("statistics oracles: 100 random inputs, exact +/-1 on monotone data", [&](Check& c) {
    std::mt19937_64 rng(7);
    double worst = 0;
    int absent_mismatch = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const int n = std::uniform_int_distribution<int>(3, 40)(rng);
      std::vector<double> x(n), y(n);
      const bool ties = trial % 2 == 0;
      for (int i = 0; i < n; ++i) {
        if (ties) {
          x[i] = std::uniform_int_distribution<int>(0, 5)(rng);
          y[i] = std::uniform_int_distribution<int>(0, 5)(rng);
        } else {
          x[i] = std::uniform_real_distribution<double>(-1e3, 1e3)(rng);
          y[i] = std::uniform_real_distribution<double>(-1e3, 1e3)(rng);
        }
      }
      const auto d = descriptive_stats(x);
      worst = std::max({worst, std::abs(d.median - oracle_median(x)), std::abs(d.q1 - oracle_quantile(x, 0.25)),
                        std::abs(d.q3 - oracle_quantile(x, 0.75))});
      const double p = std::uniform_real_distribution<double>(0, 1)(rng);
      worst = std::max(worst, std::abs(quantile(x, p) - oracle_quantile(x, p)));
      const auto lib = spearman_rho(x, y);
      const auto ref = oracle_spearman(x, y);
      if (lib.has_value() != ref.has_value()) {
        ++absent_mismatch;
      } else if (lib) {
        worst = std::max(worst, std::abs(*lib - *ref));
      }
      // Monotone transforms of x.
      std::vector<double> xs = x;
      std::sort(xs.begin(), xs.end());
      xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
      if (xs.size() >= 3) {
        std::vector<double> up, down;
        for (double v : xs) {
          up.push_back(std::exp(v / 1e3) + v);
          down.push_back(-3 * v);
        }
        c.expect(spearman_rho(xs, up) == 1.0, "increasing data did not give exactly 1");
        c.expect(spearman_rho(xs, down) == -1.0, "decreasing data did not give exactly -1");
      }
    }
    c.expect(worst <= 1e-9, "max |diff| = " + std::to_string(worst));
    c.equal(absent_mismatch, 0, "trials where only one side reported zero variance");
    std::ostringstream os;
    os << "max |diff| " << worst;
    c.note = os.str();
  });

  criterion("state-machine safety: every action sequence up to length 6", [&](Check& c) {
    Explorer ex;
    SessionInit init;
    init.session_id = "explore";
    init.participant_id = "P-000000000000";
    init.task_id = "w-sum";
    init.spec = parse_spec(read_text_file(kFixtures / "specs" / "two_sum.toml"));
    SessionConfig cfg;
    cfg.budget = ex.budget;
    const SessionEngine root(std::move(init), ex.gateway, ex.clock, stub_executor, cfg);
    std::vector<Act> path;
    ex.explore(root, 0, 6, path);
    for (size_t i = 0; i < std::min<size_t>(ex.violations.size(), 5); ++i) c.failures.push_back(ex.violations[i]);
    c.expect(ex.nodes > 0, "nothing explored");
    c.note = std::to_string(ex.nodes) + " transitions tried, " + std::to_string(ex.pruned) +
             " no-op transitions collapsed, alphabet " + std::to_string(kActs);
  });

  criterion("hash closure: fixture bundles verify; any flipped artifact byte is caught", [&](Check& c) {
    std::size_t flips = 0;
    c.expect(exported.size() >= 11, "only " + std::to_string(exported.size()) + " bundles exported");
    for (const auto& dir : exported) {
      const auto verdict = verify_bundle(dir);
      c.expect(verdict.ok(), dir.filename().string() + ": " +
                                 (verdict.problems.empty() ? std::string() : verdict.problems.front()));
    }
    // Every byte of every artifact in the happy-path bundle; for the other
    // bundles a spread of positions per artifact.
    for (const auto& dir : exported) {
      const bool every_byte = dir.filename() == "happy_path";
      for (const auto& entry : fs::directory_iterator(dir / "artifacts")) {
        const auto original = read_text_file(entry.path());
        if (original.empty()) continue;
        const std::size_t step = every_byte ? 1 : std::max<std::size_t>(1, original.size() / 8);
        for (std::size_t pos = 0; pos < original.size(); pos += step) {
          auto bytes = original;
          bytes[pos] = static_cast<char>(bytes[pos] ^ 0x20);
          write_file_atomic(entry.path(), bytes);
          ++flips;
          if (verify_bundle(dir).ok()) {
            c.failures.push_back("flip at " + entry.path().filename().string() + ":" + std::to_string(pos) +
                                 " went unnoticed");
          }
        }
        write_file_atomic(entry.path(), original);
      }
      c.expect(verify_bundle(dir).ok(), "bundle not restored: " + dir.string());
    }
    c.note = std::to_string(exported.size()) + " bundles, " + std::to_string(flips) + " single-byte flips";
  });

  criterion("debounce: 100 ms apart -> one event, 500 ms apart -> two", [&](Check& c) {
    auto clock = std::make_shared<VirtualClock>(parse_timestamp("2025-01-01T00:00:00Z"));
    auto gateway = std::make_shared<Gateway>(std::make_shared<StubBackend>(), GenerationParams{});
    auto make_engine = [&] {
      SessionInit init;
      init.session_id = "debounce";
      init.participant_id = "P-000000000000";
      init.task_id = "w-sum";
      init.spec = parse_spec(read_text_file(kFixtures / "specs" / "two_sum.toml"));
      clock->set(parse_timestamp("2025-01-01T00:00:00Z"));
      auto e = std::make_unique<SessionEngine>(std::move(init), gateway, clock, stub_executor);
      e->produce_suite();
      clock->advance(Millis{5000});
      return e;
    };
    auto count = [](const SessionEngine& e, Action a) {
      std::size_t n = 0;
      for (const auto& ev : e.log().events()) n += ev.action == a;
      return n;
    };
    auto twice = [&](SessionEngine& e, const CurationAction& action, int gap) {
      e.curate(action);
      clock->advance(Millis{gap});
      try {
        e.curate(action);
      } catch (const Error& err) {
        c.expect(err.kind() == ErrorKind::debounced, std::string("unexpected error: ") + err.what());
      }
    };
    for (int gap : {100, 500}) {
      auto e = make_engine();
      CurationAction explain;
      explain.kind = CurationKind::explain;
      explain.target_test_id = e->state().suite.tests.front().test_id;
      twice(*e, explain, gap);
      c.equal(count(*e, Action::explain_test), gap == 100 ? 1u : 2u, std::to_string(gap) + " ms explain events");
      c.equal(e->log().dropped(), gap == 100 ? 1u : 0u, std::to_string(gap) + " ms dropped count");
    }
    {
      auto e = make_engine();
      const auto size = e->state().suite.size();
      CurationAction del;
      del.kind = CurationKind::delete_test;
      del.target_test_id = e->state().suite.tests.front().test_id;
      twice(*e, del, 100);
      c.equal(count(*e, Action::delete_test), 1u, "100 ms delete events");
      c.equal(e->state().suite.size(), size - 1, "suite size after double delete");
    }
    // The same rule at the log level, for a mutating action.
    for (int gap : {100, 500}) {
      EventLog log("s");
      SessionEvent ev;
      ev.actor = Actor::user;
      ev.action = Action::delete_test;
      ev.target = "T";
      log.record(ev);
      ev.timestamp += Millis{gap};
      log.record(ev);
      c.equal(log.events().size(), gap == 100 ? 1u : 2u, std::to_string(gap) + " ms delete events");
    }
  });

  criterion("assignment balance: 300 history-fed assignments over 3 tasks", [&](Check& c) {
    const auto bank = parse_bank(read_text_file(kFixtures / "bank" / "pools.json"));
    const std::vector<std::string> warm = {"w-sum", "w-rev", "w-odd"};
    const std::vector<std::string> eval = {"e-merge", "e-window", "e-paths"};
    const auto pools = select_pools(bank, warm, eval);
    std::vector<Assignment> history;
    std::map<std::string, int> counts;
    int worst_spread = 0;
    for (int i = 0; i < 300; ++i) {
      const auto a = assign_tasks(pools, "P-" + sha256_hex(std::to_string(i)).substr(0, 12), history, 1000 + i);
      history.push_back(a);
      ++counts[a.evaluation_task];
      int lo = 1 << 30, hi = 0;
      for (const auto& id : eval) {
        lo = std::min(lo, counts[id]);
        hi = std::max(hi, counts[id]);
      }
      worst_spread = std::max(worst_spread, hi - lo);
    }
    for (const auto& id : eval) {
      c.expect(counts[id] >= 99 && counts[id] <= 101, id + " count " + std::to_string(counts[id]));
    }
    c.expect(worst_spread <= 1, "spread reached " + std::to_string(worst_spread));
    c.note = "counts " + std::to_string(counts["e-merge"]) + "/" + std::to_string(counts["e-window"]) + "/" +
             std::to_string(counts["e-paths"]) + ", max spread " + std::to_string(worst_spread);
  });

  criterion("harness integration: reference runner outcomes and exact coverage", [&](Check& c) {
    const auto profile = RunnerProfile::python_unittest();
    ExecutionLimits limits;
    const auto canned = nlohmann::json::parse(read_text_file(kFixtures / "scripts" / "regen_twice.canned.json"));
    const auto ex = extract_tests(canned["suite"][0].get<std::string>(), profile, TestOrigin::generated, {});
    TestSuite suite;
    suite.suite_version = 1;
    suite.preamble = ex.preamble;
    suite.tests = ex.tests;
    c.equal(suite.size(), 5u, "fixture suite size");

    auto run = [&](const std::string& text, std::uint64_t v) {
      return execute(suite, FunctionArtifact::make(v, extract_function_source(text), 1), profile, limits);
    };
    // Correct: 8 executable lines (def, seen = {}, for, if, return pair,
    // if not in, store, return []); the suite reaches all of them.
    const auto good = run(canned["regenerate_function"][1].get<std::string>(), 1);
    c.equal(good.pass_count, 5u, "correct function pass count");
    c.equal(good.coverage.value_or(-1), 8.0 / 8.0, "correct function coverage");
    // Buggy: falls off the end for test_no_pair and test_empty_list. Six
    // executable lines, all reached.
    const auto bad = run(canned["function"][0].get<std::string>(), 2);
    const std::map<std::string, Outcome> expected = {{"test_basic_pair", Outcome::pass},
                                                     {"test_negative_numbers", Outcome::pass},
                                                     {"test_duplicate_values", Outcome::pass},
                                                     {"test_no_pair", Outcome::fail},
                                                     {"test_empty_list", Outcome::fail}};
    for (std::size_t i = 0; i < suite.size() && i < bad.per_test.size(); ++i) {
      const auto& name = suite.tests[i].name;
      c.expect(expected.count(name) && expected.at(name) == bad.per_test[i].outcome,
               name + " outcome " + std::string(to_string(bad.per_test[i].outcome)));
    }
    c.equal(bad.coverage.value_or(-1), 6.0 / 6.0, "buggy function coverage");
    // Dead branch: 6 executable lines, the negative return never runs.
    TestSuite classify;
    classify.suite_version = 1;
    classify.tests = {
        TestCase::make("test_pos", "def test_pos(self):\n    self.assertEqual(classify(5), 'positive')\n",
                       TestOrigin::generated, {}),
        TestCase::make("test_zero", "def test_zero(self):\n    self.assertEqual(classify(0), 'zero')\n",
                       TestOrigin::generated, {})};
    const auto dead = execute(classify,
                              FunctionArtifact::make(1,
                                                     "def classify(n):\n    if n > 0:\n        return 'positive'\n"
                                                     "    if n < 0:\n        return 'negative'\n    return 'zero'\n",
                                                     1),
                              profile, limits);
    c.equal(dead.pass_count, 2u, "classify pass count");
    c.equal(dead.coverage.value_or(-1), 5.0 / 6.0, "classify coverage");
  });

  std::cout << (failed_criteria == 0 ? "all criteria passed" : std::to_string(failed_criteria) + " criteria failed")
            << "\n";
  return failed_criteria == 0 ? 0 : 1;
}
