// Operator entry point. Exit codes: 0 success, 1 failure (diagnostic on
// stderr), 2 usage error.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "specloop/bundle.hpp"
#include "specloop/config.hpp"
#include "specloop/error.hpp"
#include "specloop/headless.hpp"
#include "specloop/metrics.hpp"
#include "specloop/reference.hpp"
#include "specloop/service.hpp"
#include "specloop/task_bank.hpp"
#include "specloop/telemetry.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace specloop;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;

  AppConfig load() const {
    std::optional<fs::path> file;
    if (!config_file.empty()) file = config_file;
    return AppConfig::load(file, process_env(), overrides);
  }
};

void emit(const std::string& text, const std::string& out_file) {
  if (out_file.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(out_file, text);
  }
}

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::vector<std::string> banks;
  std::vector<std::string> difficulties;
  std::string after;
  std::string exclude;
  std::string out;
};

int run_ingest(const IngestArgs& a) {
  BankFilter filter;
  for (const auto& d : a.difficulties) filter.difficulties.insert(parse_difficulty(d));
  if (!a.after.empty()) filter.released_after = parse_date(a.after);
  if (!a.exclude.empty()) filter.exclude_ids = read_id_list(a.exclude);
  std::vector<fs::path> files(a.banks.begin(), a.banks.end());
  auto records = ingest_bank(files, filter);

  json arr = json::array();
  for (const auto& r : records) {
    json refs = json::array();
    for (const auto& t : r.reference_tests) refs.push_back({{"input", t.input}, {"expected", t.expected}});
    arr.push_back({{"task_id", r.task_id},
                   {"title", r.title},
                   {"statement", r.statement},
                   {"difficulty", to_string(r.difficulty)},
                   {"release_date", format_date(r.release_date)},
                   {"reference_signature", r.reference_signature},
                   {"reference_tests", refs},
                   {"tags", r.tags}});
  }
  emit(arr.dump(2) + "\n", a.out);
  std::cerr << records.size() << " record(s) kept\n";
  return 0;
}

// ---- serve ----------------------------------------------------------------

HttpService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int run_serve(const Common& common, bool any_pool_size) {
  auto cfg = common.load();
  if (cfg.bank.files.empty()) throw Error(ErrorKind::configuration, "serve needs bank.files");
  BankFilter filter;
  if (!cfg.bank.after.empty()) filter.released_after = parse_date(cfg.bank.after);
  if (!cfg.bank.exclude_file.empty()) filter.exclude_ids = read_id_list(cfg.bank.exclude_file);
  std::vector<fs::path> files(cfg.bank.files.begin(), cfg.bank.files.end());
  auto bank = ingest_bank(files, filter);
  auto pools = select_pools(bank, cfg.bank.warmup, cfg.bank.evaluation);
  if (any_pool_size) {
    pools.validate(std::nullopt, std::nullopt);
  } else {
    pools.validate();
  }

  ServiceOptions opts;
  opts.pools = std::move(pools);
  opts.spec_dir = cfg.bank.spec_dir;
  opts.backend_factory = [cfg] { return cfg.make_backend(); };
  opts.params = cfg.gateway.params;
  opts.config = cfg.session_config();
  opts.templates = cfg.templates();
  opts.data_dir = cfg.service.data_dir;
  opts.pseudonym_salt = cfg.service.salt;
  opts.seed = static_cast<std::uint64_t>(cfg.service.seed);
  ServiceCore core(std::move(opts));

  HttpService http(core, cfg.service.host, static_cast<int>(cfg.service.port), cfg.service.static_dir);
  g_service = &http;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "serving on http://" << cfg.service.host << ":" << cfg.service.port << "\n";
  http.run();
  g_service = nullptr;
  return 0;
}

// ---- run-script -----------------------------------------------------------

struct RunScriptArgs {
  std::string script;
  std::string out = "bundles";
  std::string backend;
  std::string fixtures;
  std::string canned;
  std::string record;
};

int run_script(const Common& common, const RunScriptArgs& a) {
  auto cfg = common.load();
  if (!a.backend.empty()) cfg.gateway.backend = a.backend;
  if (!a.fixtures.empty()) cfg.gateway.fixture_dir = a.fixtures;
  if (!a.canned.empty()) cfg.gateway.canned_file = a.canned;
  if (!a.record.empty()) cfg.gateway.record_dir = a.record;
  if (cfg.gateway.backend == "live") {
    throw Error(ErrorKind::configuration, "run-script is deterministic; use the replay or canned backend");
  }

  auto script = load_script(a.script);
  HeadlessOptions opts;
  opts.backend = cfg.make_backend();
  opts.params = cfg.gateway.params;
  opts.config = cfg.session_config();
  opts.templates = cfg.templates();
  opts.out_dir = a.out;
  opts.pseudonym_salt = cfg.service.salt;
  auto result = headless_run(script, opts);

  std::cout << result.bundle_dir.string() << "\n";
  std::cout << metrics_csv_header() << "\n" << metrics_csv_row(result.metrics) << "\n";
  if (result.debounced_steps > 0) std::cerr << result.debounced_steps << " step(s) debounced\n";
  return 0;
}

// ---- metrics / summarize --------------------------------------------------

int run_metrics(const std::vector<std::string>& dirs, bool print_json) {
  for (const auto& d : dirs) {
    auto bundle = read_bundle(d);
    auto m = metrics_from_bundle(bundle);
    write_file_atomic(fs::path(d) / "metrics.csv", metrics_csv(std::span<const SessionMetrics>(&m, 1)));
    for (const auto& w : m.warnings) std::cerr << d << ": warning: " << w << "\n";
    if (print_json) {
      std::cout << to_json(m).dump() << "\n";
    } else {
      if (&d == &dirs.front()) std::cout << metrics_csv_header() << "\n";
      std::cout << metrics_csv_row(m) << "\n";
    }
  }
  return 0;
}

struct SummarizeArgs {
  std::vector<std::string> dirs;
  std::string out = "study_summary.json";
  std::string correlations;
  std::string metrics_out;
  bool exclude_outliers = false;
};

int run_summarize(const SummarizeArgs& a) {
  std::vector<SessionMetrics> rows;
  for (const auto& d : a.dirs) rows.push_back(metrics_from_bundle(read_bundle(d)));
  auto summary = summarize(rows, a.exclude_outliers);
  write_file_atomic(a.out, to_json(summary).dump(2) + "\n");
  if (!a.correlations.empty()) write_file_atomic(a.correlations, correlation_csv(summary));
  if (!a.metrics_out.empty()) write_file_atomic(a.metrics_out, metrics_csv(rows));
  std::cerr << "summarized " << summary.sessions << " session(s)";
  if (!summary.excluded_sessions.empty()) std::cerr << ", excluded " << summary.excluded_sessions.size();
  std::cerr << "\n";
  return 0;
}

// ---- verify-bundle --------------------------------------------------------

int run_verify(const std::vector<std::string>& dirs, const std::vector<std::string>& patterns) {
  VerifyOptions opts;
  for (const auto& p : patterns) opts.identifier_patterns.push_back(p);
  int rc = 0;
  for (const auto& d : dirs) {
    auto r = verify_bundle(d, opts);
    if (r.ok()) {
      std::cout << d << ": ok\n";
    } else {
      rc = 1;
      for (const auto& p : r.problems) std::cout << d << ": " << p << "\n";
    }
  }
  return rc;
}

// ---- validate-against-reference ------------------------------------------

int run_validate(const Common& common, const std::vector<std::string>& dirs, const std::vector<std::string>& banks) {
  auto cfg = common.load();
  std::vector<fs::path> files(banks.begin(), banks.end());
  if (files.empty()) files.assign(cfg.bank.files.begin(), cfg.bank.files.end());
  if (files.empty()) throw Error(ErrorKind::configuration, "validate-against-reference needs --bank or bank.files");
  auto bank = ingest_bank(files, BankFilter{});
  for (const auto& d : dirs) {
    auto bundle = read_bundle(d);
    auto task_id = bundle.session.at("summary").at("task_id").get<std::string>();
    auto it = std::find_if(bank.begin(), bank.end(), [&](const TaskRecord& r) { return r.task_id == task_id; });
    if (it == bank.end()) throw Error(ErrorKind::not_found, "task '" + task_id + "' is not in the bank");
    auto v = validate_against_reference(bundle, *it, cfg.runner_profile(), cfg.limits());
    std::cout << to_json(v).dump() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Specification-driven test-curation workbench: sessions, telemetry and metrics"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_file, "TOML configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", common.overrides, "Override a config key (section.key=value); repeatable");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Validate and filter a task bank");
  c_ingest->add_option("--bank", ingest.banks, "Bank file (JSON array); repeatable")->required();
  c_ingest->add_option("--difficulty", ingest.difficulties, "Keep this difficulty (easy|medium|hard); repeatable");
  c_ingest->add_option("--after", ingest.after, "Keep tasks released strictly after YYYY-MM-DD");
  c_ingest->add_option("--exclude", ingest.exclude, "File of task ids to drop");
  c_ingest->add_option("--out", ingest.out, "Write the kept records here instead of stdout");

  bool any_pool_size = false;
  auto* c_serve = app.add_subcommand("serve", "Run the local HTTP service");
  c_serve->add_flag("--any-pool-size", any_pool_size, "Accept pools of any non-zero size");

  RunScriptArgs rs;
  auto* c_run = app.add_subcommand("run-script", "Run a scripted session on a virtual clock and export its bundle");
  c_run->add_option("script", rs.script, "Script JSON file")->required()->check(CLI::ExistingFile);
  c_run->add_option("--out", rs.out, "Directory that receives <session_id>/");
  c_run->add_option("--backend", rs.backend, "replay or canned")->check(CLI::IsMember({"replay", "canned"}));
  c_run->add_option("--fixtures", rs.fixtures, "Replay fixture directory");
  c_run->add_option("--canned", rs.canned, "Canned response file (canned backend)");
  c_run->add_option("--record-fixtures", rs.record, "Write a replay fixture for every generation here");

  std::vector<std::string> metric_dirs;
  bool metrics_json = false;
  auto* c_metrics = app.add_subcommand("metrics", "Recompute metrics.csv from a bundle's log");
  c_metrics->add_option("bundle", metric_dirs, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  c_metrics->add_flag("--json", metrics_json, "Print metrics with flags and warnings as JSON");

  SummarizeArgs sum;
  auto* c_sum = app.add_subcommand("summarize", "Descriptive statistics and correlations over bundles");
  c_sum->add_option("bundles", sum.dirs, "Bundle directories")->required()->check(CLI::ExistingDirectory);
  c_sum->add_option("--out", sum.out, "Summary JSON path");
  c_sum->add_option("--correlations", sum.correlations, "Also write the correlation table as CSV");
  c_sum->add_option("--metrics-out", sum.metrics_out, "Also write all sessions' rows as one metrics.csv");
  c_sum->add_flag("--exclude-outliers", sum.exclude_outliers, "Leave out sessions flagged as interrupted");

  std::vector<std::string> verify_dirs;
  std::vector<std::string> patterns;
  auto* c_verify = app.add_subcommand("verify-bundle", "Check hash closure, sequence and pseudonymity");
  c_verify->add_option("bundle", verify_dirs, "Bundle directory")->required();
  c_verify->add_option("--pattern", patterns, "Extra identifier regex that must not appear; repeatable");

  std::vector<std::string> val_dirs;
  std::vector<std::string> val_banks;
  auto* c_val = app.add_subcommand("validate-against-reference",
                                   "Run final functions against held-out reference tests (post hoc)");
  c_val->add_option("bundle", val_dirs, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  c_val->add_option("--bank", val_banks, "Bank file with reference tests; repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (c_ingest->parsed()) return run_ingest(ingest);
    if (c_serve->parsed()) return run_serve(common, any_pool_size);
    if (c_run->parsed()) return run_script(common, rs);
    if (c_metrics->parsed()) return run_metrics(metric_dirs, metrics_json);
    if (c_sum->parsed()) return run_summarize(sum);
    if (c_verify->parsed()) return run_verify(verify_dirs, patterns);
    if (c_val->parsed()) return run_validate(common, val_dirs, val_banks);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    if (!e.detail().empty()) std::cerr << e.detail() << "\n";
    return e.kind() == ErrorKind::usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
