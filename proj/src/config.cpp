#include "specloop/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <variant>

#include "specloop/error.hpp"
#include "specloop/toml.hpp"

namespace specloop {

namespace fs = std::filesystem;
using nlohmann::json;

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

namespace {

struct PathString {
  std::string* target;
};
struct PathList {
  std::vector<std::string>* target;
};

using Slot = std::variant<std::string*, std::int64_t*, int*, double*, bool*, std::vector<std::string>*, PathString,
                          PathList>;

std::map<std::string, Slot, std::less<>> slots(AppConfig& c) {
  return {
      {"gateway.backend", &c.gateway.backend},
      {"gateway.endpoint_url", &c.gateway.endpoint_url},
      {"gateway.api_key_env", &c.gateway.api_key_env},
      {"gateway.model_id", &c.gateway.params.model_id},
      {"gateway.temperature", &c.gateway.params.temperature},
      {"gateway.seed", &c.gateway.params.seed},
      {"gateway.max_tokens", &c.gateway.params.max_tokens},
      {"gateway.fixture_dir", PathString{&c.gateway.fixture_dir}},
      {"gateway.canned_file", PathString{&c.gateway.canned_file}},
      {"gateway.record_dir", PathString{&c.gateway.record_dir}},
      {"gateway.timeout_ms", &c.gateway.timeout_ms},
      {"gateway.max_retries", &c.gateway.max_retries},
      {"session.budget_seconds", &c.session.budget_seconds},
      {"session.debounce_ms", &c.session.debounce_ms},
      {"session.prompts_dir", PathString{&c.session.prompts_dir}},
      {"harness.python", &c.harness.python},
      {"harness.wall_timeout_seconds", &c.harness.wall_timeout_seconds},
      {"harness.memory_cap_mb", &c.harness.memory_cap_mb},
      {"harness.isolate_network", &c.harness.isolate_network},
      {"harness.coverage", &c.harness.coverage},
      {"bank.files", PathList{&c.bank.files}},
      {"bank.warmup", &c.bank.warmup},
      {"bank.evaluation", &c.bank.evaluation},
      {"bank.after", &c.bank.after},
      {"bank.exclude_file", PathString{&c.bank.exclude_file}},
      {"bank.spec_dir", PathString{&c.bank.spec_dir}},
      {"service.host", &c.service.host},
      {"service.port", &c.service.port},
      {"service.data_dir", PathString{&c.service.data_dir}},
      {"service.salt_env", &c.service.salt_env},
      {"service.seed", &c.service.seed},
      {"service.static_dir", PathString{&c.service.static_dir}},
  };
}

std::string resolve(std::string_view value, const fs::path& base) {
  if (value.empty() || base.empty()) return std::string(value);
  fs::path p(value);
  return p.is_absolute() ? p.string() : (base / p).lexically_normal().string();
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw Error(ErrorKind::configuration,
              "config key '" + std::string(key) + "': '" + std::string(value) + "' is not " + std::string(expected));
}

std::int64_t parse_integer(std::string_view key, std::string_view value) {
  std::string s(value);
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  bad_value(key, value, "an integer");
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    auto comma = value.find(',', start);
    auto part = value.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    auto b = part.find_first_not_of(" \t");
    auto e = part.find_last_not_of(" \t");
    if (b != std::string_view::npos) out.emplace_back(part.substr(b, e - b + 1));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// TOML scalar or string array rendered to the text form accepted by set().
std::string toml_to_text(std::string_view key, const toml::Value& v) {
  if (v.is_string()) return v.as_string();
  if (v.is_integer()) return std::to_string(v.as_integer());
  if (v.is_float()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v.as_float());
    return buf;
  }
  if (v.is_bool()) return v.as_bool() ? "true" : "false";
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v.as_array()) {
      if (!item.is_string()) bad_value(key, item.type_name(), "a string array element");
      if (item.as_string().find(',') != std::string::npos) bad_value(key, item.as_string(), "free of commas");
      if (!out.empty()) out += ',';
      out += item.as_string();
    }
    return out;
  }
  bad_value(key, v.type_name(), "a scalar or string array");
}

std::string env_name(std::string_view key) {
  std::string out = "SPECLOOP_";
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<std::string> AppConfig::keys() {
  AppConfig c;
  std::vector<std::string> out;
  for (const auto& [k, _] : slots(c)) out.push_back(k);
  return out;
}

void AppConfig::set(std::string_view key, std::string_view value, const fs::path& base) {
  auto table = slots(*this);
  auto it = table.find(key);
  if (it == table.end()) throw Error(ErrorKind::configuration, "unknown config key '" + std::string(key) + "'");
  std::visit(
      [&](auto&& slot) {
        using T = std::decay_t<decltype(slot)>;
        if constexpr (std::is_same_v<T, std::string*>) {
          *slot = std::string(value);
        } else if constexpr (std::is_same_v<T, std::int64_t*>) {
          *slot = parse_integer(key, value);
        } else if constexpr (std::is_same_v<T, int*>) {
          auto v = parse_integer(key, value);
          if (v < 1 || v > 1'000'000) bad_value(key, value, "in 1..1000000");
          *slot = static_cast<int>(v);
        } else if constexpr (std::is_same_v<T, double*>) {
          std::string s(value);
          try {
            std::size_t used = 0;
            double v = std::stod(s, &used);
            if (used != s.size()) bad_value(key, value, "a number");
            *slot = v;
          } catch (const std::logic_error&) {
            bad_value(key, value, "a number");
          }
        } else if constexpr (std::is_same_v<T, bool*>) {
          if (value == "true" || value == "1") {
            *slot = true;
          } else if (value == "false" || value == "0") {
            *slot = false;
          } else {
            bad_value(key, value, "a boolean");
          }
        } else if constexpr (std::is_same_v<T, std::vector<std::string>*>) {
          *slot = split_list(value);
        } else if constexpr (std::is_same_v<T, PathString>) {
          *slot.target = resolve(value, base);
        } else if constexpr (std::is_same_v<T, PathList>) {
          slot.target->clear();
          for (const auto& p : split_list(value)) slot.target->push_back(resolve(p, base));
        }
      },
      it->second);
  if (key == "gateway.backend" && value != "replay" && value != "live" && value != "canned") {
    bad_value(key, value, "replay, live or canned");
  }
}

AppConfig AppConfig::load(const std::optional<fs::path>& file, const EnvLookup& env,
                          const std::vector<std::string>& overrides) {
  AppConfig c;
  if (file) {
    std::string text;
    try {
      text = read_text_file(*file);
    } catch (const Error& e) {
      throw Error(ErrorKind::configuration, std::string("cannot read config: ") + e.what());
    }
    auto root = toml::parse(text);
    const fs::path base = fs::absolute(*file).parent_path();
    for (const auto& [section, value] : root) {
      if (!value.is_table()) {
        throw Error(ErrorKind::configuration, "config: top-level key '" + section + "' must be a [section]");
      }
      for (const auto& [name, item] : value.as_table()) {
        const std::string key = section + "." + name;
        if (key == "gateway.api_key") {
          throw Error(ErrorKind::configuration, "config: API keys are read from the environment (gateway.api_key_env)");
        }
        c.set(key, toml_to_text(key, item), base);
      }
    }
  }
  if (env) {
    for (const auto& key : keys()) {
      if (auto v = env(env_name(key))) c.set(key, *v);
    }
  }
  for (const auto& o : overrides) {
    auto eq = o.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::configuration, "override '" + o + "' is not key=value");
    c.set(std::string_view(o).substr(0, eq), std::string_view(o).substr(eq + 1));
  }
  if (env) {
    if (auto key = env(c.gateway.api_key_env)) c.gateway.api_key = *key;
    if (auto salt = env(c.service.salt_env)) c.service.salt = *salt;
  }
  if (c.session.budget_seconds <= 0) throw Error(ErrorKind::configuration, "session.budget_seconds must be positive");
  if (c.session.debounce_ms < 0) throw Error(ErrorKind::configuration, "session.debounce_ms must be >= 0");
  if (c.harness.wall_timeout_seconds <= 0) {
    throw Error(ErrorKind::configuration, "harness.wall_timeout_seconds must be positive");
  }
  if (c.service.port < 0 || c.service.port > 65535) throw Error(ErrorKind::configuration, "service.port out of range");
  return c;
}

ExecutionLimits AppConfig::limits() const {
  ExecutionLimits l;
  l.wall_timeout = from_seconds(harness.wall_timeout_seconds);
  if (harness.memory_cap_mb > 0) {
    l.memory_cap_bytes = static_cast<std::size_t>(harness.memory_cap_mb) * 1024 * 1024;
  } else {
    l.memory_cap_bytes.reset();
  }
  l.isolate_network = harness.isolate_network;
  return l;
}

RunnerProfile AppConfig::runner_profile() const {
  auto p = RunnerProfile::python_unittest(harness.python);
  p.coverage_enabled = harness.coverage;
  return p;
}

SessionConfig AppConfig::session_config() const {
  SessionConfig s;
  s.budget = from_seconds(session.budget_seconds);
  s.debounce_window = Millis{session.debounce_ms};
  s.profile = runner_profile();
  s.limits = limits();
  return s;
}

PromptTemplates AppConfig::templates() const {
  return session.prompts_dir.empty() ? PromptTemplates::builtin() : PromptTemplates::from_directory(session.prompts_dir);
}

std::shared_ptr<Backend> AppConfig::make_backend() const {
  std::shared_ptr<Backend> backend;
  if (gateway.backend == "replay") {
    backend = std::make_shared<ReplayBackend>(gateway.fixture_dir);
  } else if (gateway.backend == "canned") {
    if (gateway.canned_file.empty()) throw Error(ErrorKind::configuration, "canned backend needs gateway.canned_file");
    backend = CannedBackend::from_file(gateway.canned_file);
  } else if (gateway.backend == "live") {
    if (gateway.endpoint_url.empty()) throw Error(ErrorKind::configuration, "live backend needs gateway.endpoint_url");
    LiveBackendConfig lc;
    lc.endpoint_url = gateway.endpoint_url;
    lc.api_key = gateway.api_key;
    lc.timeout = Millis{gateway.timeout_ms};
    lc.max_retries = static_cast<int>(gateway.max_retries);
    backend = std::make_shared<LiveBackend>(lc);
  } else {
    throw Error(ErrorKind::configuration, "unknown gateway.backend '" + gateway.backend + "'");
  }
  if (!gateway.record_dir.empty()) backend = std::make_shared<RecordingBackend>(backend, gateway.record_dir);
  return backend;
}

json AppConfig::to_json() const {
  return {{"gateway",
           {{"backend", gateway.backend},
            {"endpoint_url", gateway.endpoint_url},
            {"api_key_env", gateway.api_key_env},
            {"api_key_set", !gateway.api_key.empty()},
            {"params", gateway.params.to_json()},
            {"fixture_dir", gateway.fixture_dir},
            {"canned_file", gateway.canned_file},
            {"record_dir", gateway.record_dir},
            {"timeout_ms", gateway.timeout_ms},
            {"max_retries", gateway.max_retries}}},
          {"session",
           {{"budget_seconds", session.budget_seconds},
            {"debounce_ms", session.debounce_ms},
            {"prompts_dir", session.prompts_dir}}},
          {"harness",
           {{"python", harness.python},
            {"wall_timeout_seconds", harness.wall_timeout_seconds},
            {"memory_cap_mb", harness.memory_cap_mb},
            {"isolate_network", harness.isolate_network},
            {"coverage", harness.coverage}}},
          {"bank",
           {{"files", bank.files},
            {"warmup", bank.warmup},
            {"evaluation", bank.evaluation},
            {"after", bank.after},
            {"exclude_file", bank.exclude_file},
            {"spec_dir", bank.spec_dir}}},
          {"service",
           {{"host", service.host},
            {"port", service.port},
            {"data_dir", service.data_dir},
            {"salt_env", service.salt_env},
            {"salt_set", !service.salt.empty()},
            {"seed", service.seed},
            {"static_dir", service.static_dir}}}};
}

}  // namespace specloop
