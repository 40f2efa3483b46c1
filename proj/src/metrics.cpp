#include "specloop/metrics.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "specloop/error.hpp"
#include "specloop/stats.hpp"

namespace specloop {

using nlohmann::json;

std::vector<std::string> diversity_tokens(std::string_view body, std::span<const std::string> ignored) {
  std::set<std::string> out;
  auto is_word = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
  };
  std::size_t i = 0;
  while (i < body.size()) {
    if (!is_word(body[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < body.size() && is_word(body[j])) ++j;
    std::string tok(body.substr(i, j - i));
    if (std::find(ignored.begin(), ignored.end(), tok) == ignored.end()) out.insert(std::move(tok));
    i = j;
  }
  return {out.begin(), out.end()};
}

namespace {

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

double test_diversity(const TestSuite& suite, std::span<const std::string> ignored_tokens) {
  const std::size_t n = suite.tests.size();
  if (n < 2) return 0.0;
  std::vector<std::vector<std::string>> sets;
  sets.reserve(n);
  for (const auto& t : suite.tests) sets.push_back(diversity_tokens(t.body, ignored_tokens));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sum += jaccard(sets[i], sets[j]);
      ++pairs;
    }
  }
  return 1.0 - sum / static_cast<double>(pairs);
}

SessionMetrics compute_session_metrics(const MetricsInput& in) {
  SessionMetrics m;
  m.session_id = in.session_id;
  m.task_id = in.task_id;
  const auto& events = in.events;

  std::optional<Timestamp> first_suite;
  std::optional<std::uint64_t> pass_seq;
  std::optional<Timestamp> pass_at;
  std::optional<Timestamp> previous;
  bool closed = false;
  Millis max_gap{0};

  for (const auto& e : events) {
    if (previous) max_gap = std::max(max_gap, std::chrono::duration_cast<Millis>(e.timestamp - *previous));
    previous = e.timestamp;
    if (e.tokens) m.total_tokens += e.tokens->total();
    switch (e.action) {
      case Action::produce_suite:
        if (!first_suite) first_suite = e.timestamp;
        ++m.suite_regenerations;
        break;
      case Action::regenerate_suite:
        ++m.suite_regenerations;
        break;
      case Action::explain_test:
      case Action::regenerate_test:
      case Action::delete_test:
      case Action::edit_test:
        ++m.test_edits;
        break;
      case Action::advice_generated:
        ++m.advice_triggers;
        break;
      case Action::ask_function:
      case Action::regenerate_function:
        if (!pass_seq) ++m.iterations_to_pass;
        break;
      case Action::run_tests: {
        if (pass_seq || !e.target) break;
        for (const auto& r : in.reports) {
          if (std::to_string(r.function_version) == *e.target && r.all_pass()) {
            pass_seq = e.seq;
            pass_at = e.timestamp;
            break;
          }
        }
        break;
      }
      case Action::session_end:
        if (e.target && *e.target == "closed") closed = true;
        break;
      default:
        break;
    }
  }
  // The first production is the mandatory step, not a regeneration.
  if (m.suite_regenerations > 0) --m.suite_regenerations;

  if (!in.reports.empty()) {
    const auto& last = in.reports.back();
    m.pass_rate = last.pass_rate();
    m.pass_all = last.all_pass() ? 1 : 0;
    m.test_coverage = last.coverage;
  }
  if (in.final_suite) m.test_diversity = test_diversity(*in.final_suite, in.boilerplate_tokens);

  const double budget_s = to_seconds(in.budget);
  if (!first_suite) {
    m.warnings.push_back("log has no produce_suite event; TimeToPass set to the budget");
  }
  if (first_suite && pass_at) {
    auto elapsed = std::chrono::duration_cast<Millis>(*pass_at - *first_suite);
    if (elapsed < Millis{0}) elapsed = Millis{0};
    m.time_to_pass = std::min(to_seconds(elapsed), budget_s);
  } else {
    m.time_to_pass = budget_s;
    m.flags.budget_capped = true;
    m.pass_all = 0;
  }
  if (m.pass_all == 0 && pass_at) {
    m.warnings.push_back("a run passed but the final report does not; PassAll follows the final report");
  }
  m.flags.interrupted_outlier = closed || max_gap > kOutlierGap;
  return m;
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "session_id", "task_id",    "PassAll",   "PassRate",           "TestCoverage",   "TestDiversity",
      "TimeToPass", "IterationsToPass", "TestEdits", "SuiteRegenerations", "AdviceTriggers", "TotalTokens"};
  return cols;
}

std::string metrics_csv_header() {
  std::string out;
  for (const auto& c : metrics_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void check_csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") != std::string::npos) {
    throw Error(ErrorKind::validation, "identifier '" + value + "' cannot be written to CSV unquoted");
  }
}

}  // namespace

std::string metrics_csv_row(const SessionMetrics& m) {
  check_csv_field(m.session_id);
  check_csv_field(m.task_id);
  std::ostringstream os;
  os << m.session_id << ',' << m.task_id << ',' << m.pass_all << ',' << fixed(m.pass_rate, 6) << ','
     << (m.test_coverage ? fixed(*m.test_coverage, 6) : std::string{}) << ',' << fixed(m.test_diversity, 6) << ','
     << fixed(m.time_to_pass, 3) << ',' << m.iterations_to_pass << ',' << m.test_edits << ','
     << m.suite_regenerations << ',' << m.advice_triggers << ',' << m.total_tokens;
  return os.str();
}

std::string metrics_csv(std::span<const SessionMetrics> rows) {
  std::string out = metrics_csv_header() + "\n";
  for (const auto& r : rows) out += metrics_csv_row(r) + "\n";
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

double parse_double(const std::string& s, std::size_t line, const char* col) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::parse, "metrics.csv line " + std::to_string(line) + ": bad " + col + " '" + s + "'");
  }
}

std::int64_t parse_int(const std::string& s, std::size_t line, const char* col) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::parse, "metrics.csv line " + std::to_string(line) + ": bad " + col + " '" + s + "'");
  }
}

}  // namespace

std::vector<SessionMetrics> parse_metrics_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, "metrics.csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != metrics_csv_header()) throw Error(ErrorKind::parse, "metrics.csv header mismatch: '" + line + "'");
  std::vector<SessionMetrics> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != metrics_columns().size()) {
      throw Error(ErrorKind::parse, "metrics.csv line " + std::to_string(lineno) + ": expected " +
                                        std::to_string(metrics_columns().size()) + " fields");
    }
    SessionMetrics m;
    m.session_id = f[0];
    m.task_id = f[1];
    m.pass_all = static_cast<int>(parse_int(f[2], lineno, "PassAll"));
    m.pass_rate = parse_double(f[3], lineno, "PassRate");
    if (!f[4].empty()) m.test_coverage = parse_double(f[4], lineno, "TestCoverage");
    m.test_diversity = parse_double(f[5], lineno, "TestDiversity");
    m.time_to_pass = parse_double(f[6], lineno, "TimeToPass");
    m.iterations_to_pass = static_cast<std::size_t>(parse_int(f[7], lineno, "IterationsToPass"));
    m.test_edits = static_cast<std::size_t>(parse_int(f[8], lineno, "TestEdits"));
    m.suite_regenerations = static_cast<std::size_t>(parse_int(f[9], lineno, "SuiteRegenerations"));
    m.advice_triggers = static_cast<std::size_t>(parse_int(f[10], lineno, "AdviceTriggers"));
    m.total_tokens = parse_int(f[11], lineno, "TotalTokens");
    out.push_back(std::move(m));
  }
  return out;
}

json to_json(const SessionMetrics& m) {
  json j = {{"session_id", m.session_id},
            {"task_id", m.task_id},
            {"PassAll", m.pass_all},
            {"PassRate", m.pass_rate},
            {"TestCoverage", m.test_coverage ? json(*m.test_coverage) : json(nullptr)},
            {"TestDiversity", m.test_diversity},
            {"TimeToPass", m.time_to_pass},
            {"IterationsToPass", m.iterations_to_pass},
            {"TestEdits", m.test_edits},
            {"SuiteRegenerations", m.suite_regenerations},
            {"AdviceTriggers", m.advice_triggers},
            {"TotalTokens", m.total_tokens},
            {"flags", {{"budget_capped", m.flags.budget_capped}, {"interrupted_outlier", m.flags.interrupted_outlier}}},
            {"warnings", m.warnings}};
  return j;
}

namespace {

const std::vector<std::string>& continuous_columns() {
  static const std::vector<std::string> cols = {"PassRate",         "TestCoverage", "TestDiversity",
                                                "TimeToPass",       "IterationsToPass", "TestEdits",
                                                "SuiteRegenerations", "AdviceTriggers", "TotalTokens"};
  return cols;
}

std::optional<double> column_value(const SessionMetrics& m, const std::string& name) {
  if (name == "PassAll") return m.pass_all;
  if (name == "PassRate") return m.pass_rate;
  if (name == "TestCoverage") return m.test_coverage;
  if (name == "TestDiversity") return m.test_diversity;
  if (name == "TimeToPass") return m.time_to_pass;
  if (name == "IterationsToPass") return static_cast<double>(m.iterations_to_pass);
  if (name == "TestEdits") return static_cast<double>(m.test_edits);
  if (name == "SuiteRegenerations") return static_cast<double>(m.suite_regenerations);
  if (name == "AdviceTriggers") return static_cast<double>(m.advice_triggers);
  if (name == "TotalTokens") return static_cast<double>(m.total_tokens);
  throw Error(ErrorKind::usage, "unknown metrics column '" + name + "'");
}

}  // namespace

std::vector<std::pair<std::string, std::string>> default_correlation_pairs() {
  return {{"TestEdits", "PassRate"},        {"TestEdits", "TimeToPass"},     {"SuiteRegenerations", "TimeToPass"},
          {"AdviceTriggers", "IterationsToPass"}, {"TestDiversity", "PassRate"}, {"TestCoverage", "PassRate"},
          {"TotalTokens", "TimeToPass"}};
}

StudySummary summarize(std::span<const SessionMetrics> sessions, bool exclude_outliers,
                       const std::vector<std::pair<std::string, std::string>>& pairs) {
  StudySummary s;
  s.outliers_excluded = exclude_outliers;
  std::vector<const SessionMetrics*> kept;
  for (const auto& m : sessions) {
    if (exclude_outliers && m.flags.interrupted_outlier) {
      s.excluded_sessions.push_back(m.session_id);
    } else {
      kept.push_back(&m);
    }
  }
  s.sessions = kept.size();

  for (const auto& name : continuous_columns()) {
    std::vector<double> values;
    for (const auto* m : kept) {
      if (auto v = column_value(*m, name)) values.push_back(*v);
    }
    VariableSummary v;
    v.name = name;
    v.n = values.size();
    if (!values.empty()) {
      auto d = descriptive_stats(values);
      v.median = d.median;
      v.q1 = d.q1;
      v.q3 = d.q3;
      v.iqr = d.iqr();
    }
    s.variables.push_back(v);
  }

  ProportionSummary p;
  p.name = "PassAll";
  p.n = kept.size();
  for (const auto* m : kept) p.count += m->pass_all == 1 ? 1 : 0;
  p.proportion = p.n == 0 ? 0.0 : static_cast<double>(p.count) / static_cast<double>(p.n);
  s.proportions.push_back(p);

  for (const auto& [xn, yn] : pairs) {
    Correlation c;
    c.x = xn;
    c.y = yn;
    std::vector<double> xs, ys;
    for (const auto* m : kept) {
      auto xv = column_value(*m, xn);
      auto yv = column_value(*m, yn);
      if (xv && yv) {
        xs.push_back(*xv);
        ys.push_back(*yv);
      }
    }
    c.n = xs.size();
    if (c.n < 3) {
      c.note = "fewer than 3 complete pairs";
    } else {
      c.rho = spearman_rho(xs, ys);
      if (!c.rho) c.note = "zero rank variance";
    }
    s.correlations.push_back(std::move(c));
  }
  return s;
}

json to_json(const StudySummary& s) {
  json vars = json::object();
  for (const auto& v : s.variables) {
    if (v.n == 0) {
      vars[v.name] = {{"n", 0}, {"median", nullptr}, {"q1", nullptr}, {"q3", nullptr}, {"iqr", nullptr}};
    } else {
      vars[v.name] = {{"n", v.n}, {"median", v.median}, {"q1", v.q1}, {"q3", v.q3}, {"iqr", v.iqr}};
    }
  }
  json props = json::object();
  for (const auto& p : s.proportions) props[p.name] = {{"n", p.n}, {"count", p.count}, {"proportion", p.proportion}};
  json corr = json::array();
  for (const auto& c : s.correlations) {
    json j = {{"x", c.x}, {"y", c.y}, {"n", c.n}, {"rho", c.rho ? json(*c.rho) : json(nullptr)}};
    if (!c.note.empty()) j["note"] = c.note;
    corr.push_back(std::move(j));
  }
  return {{"sessions", s.sessions},
          {"outliers_excluded", s.outliers_excluded},
          {"excluded_sessions", s.excluded_sessions},
          {"variables", vars},
          {"proportions", props},
          {"correlations", corr}};
}

std::string correlation_csv(const StudySummary& s) {
  std::string out = "x,y,n,rho\n";
  for (const auto& c : s.correlations) {
    out += c.x + "," + c.y + "," + std::to_string(c.n) + "," + (c.rho ? fixed(*c.rho, 6) : std::string{}) + "\n";
  }
  return out;
}

}  // namespace specloop
