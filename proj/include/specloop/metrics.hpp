#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "specloop/telemetry.hpp"
#include "specloop/test_harness.hpp"
#include "specloop/time.hpp"

namespace specloop {

struct MetricFlags {
  bool budget_capped = false;
  bool interrupted_outlier = false;
};

struct SessionMetrics {
  std::string session_id;
  std::string task_id;
  int pass_all = 0;
  double pass_rate = 0.0;
  std::optional<double> test_coverage;
  double test_diversity = 0.0;
  double time_to_pass = 0.0;  // seconds
  std::size_t iterations_to_pass = 0;
  std::size_t test_edits = 0;
  std::size_t suite_regenerations = 0;
  std::size_t advice_triggers = 0;
  std::int64_t total_tokens = 0;
  MetricFlags flags;
  std::vector<std::string> warnings;
};

/// Gap between consecutive events above which a session is flagged as an
/// interrupted outlier.
inline constexpr Millis kOutlierGap{5 * 60 * 1000};

/// Token sets over [A-Za-z0-9_]+ runs, minus `ignored`; case-sensitive.
std::vector<std::string> diversity_tokens(std::string_view body, std::span<const std::string> ignored);

/// 1 - mean pairwise Jaccard similarity of the tests' token sets. Two empty
/// token sets count as identical (J = 1). Fewer than two tests -> 0.
double test_diversity(const TestSuite& suite, std::span<const std::string> ignored_tokens = {});

struct MetricsInput {
  std::span<const SessionEvent> events;
  /// In execution order; matched to run_tests events by function version.
  std::span<const ExecutionReport> reports;
  Millis budget{0};
  /// Suite as of the end of the session, for TestDiversity.
  std::optional<TestSuite> final_suite;
  std::vector<std::string> boilerplate_tokens;
  std::string session_id;
  std::string task_id;
};

/// Derives the dependent variables from a session's log alone (plus the
/// reports and final suite the log's payloads point to).
///
/// time_to_pass: first all-pass run_tests minus first produce_suite, capped
/// at the budget; the full budget when no run passes. iterations_to_pass:
/// ask_function + regenerate_function events up to the first all-pass (all of
/// them when none passes). A log without produce_suite yields a warning and
/// budget-capped values rather than an error.
SessionMetrics compute_session_metrics(const MetricsInput& input);

/// metrics.csv columns, in order.
const std::vector<std::string>& metrics_columns();
std::string metrics_csv_header();
std::string metrics_csv_row(const SessionMetrics& m);
/// Header plus one row per entry, each line '\n'-terminated.
std::string metrics_csv(std::span<const SessionMetrics> rows);
/// Inverse of metrics_csv (flags and warnings are not part of the CSV).
/// Throws Error{parse} on a wrong header or malformed row.
std::vector<SessionMetrics> parse_metrics_csv(std::string_view text);

nlohmann::json to_json(const SessionMetrics& m);

struct VariableSummary {
  std::string name;
  std::size_t n = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
};

struct ProportionSummary {
  std::string name;
  std::size_t n = 0;
  std::size_t count = 0;
  double proportion = 0.0;
};

struct Correlation {
  std::string x;
  std::string y;
  std::size_t n = 0;
  std::optional<double> rho;
  std::string note;  // why rho is absent, when it is
};

struct StudySummary {
  std::size_t sessions = 0;
  bool outliers_excluded = false;
  std::vector<std::string> excluded_sessions;
  std::vector<VariableSummary> variables;
  std::vector<ProportionSummary> proportions;
  std::vector<Correlation> correlations;
};

/// Default exploratory pairs (process measures against outcomes).
std::vector<std::pair<std::string, std::string>> default_correlation_pairs();

/// Median/IQR for every continuous column, the PassAll proportion, and
/// Spearman's rho for each requested pair over sessions where both values
/// are present. Outlier exclusion is explicit and the excluded ids are
/// listed. Unknown column names throw Error{usage}.
StudySummary summarize(std::span<const SessionMetrics> sessions, bool exclude_outliers,
                       const std::vector<std::pair<std::string, std::string>>& pairs = default_correlation_pairs());

nlohmann::json to_json(const StudySummary& s);
std::string correlation_csv(const StudySummary& s);

}  // namespace specloop
