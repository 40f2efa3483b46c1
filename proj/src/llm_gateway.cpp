#include "specloop/llm_gateway.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include "specloop/error.hpp"
#include "specloop/hashing.hpp"

namespace specloop {

using nlohmann::json;

namespace {

constexpr std::string_view kKindNames[] = {"suite",    "single_test",         "explain_test",
                                           "function", "regenerate_function", "advice"};

std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string trim_trailing_blank_lines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (true) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

}  // namespace

std::string_view to_string(GenerationKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

GenerationKind parse_generation_kind(std::string_view text) {
  for (std::size_t i = 0; i < std::size(kKindNames); ++i) {
    if (kKindNames[i] == text) return static_cast<GenerationKind>(i);
  }
  throw Error(ErrorKind::parse, "unknown generation kind '" + std::string(text) + "'");
}

json GenerationParams::to_json() const {
  return {{"model_id", model_id}, {"temperature", temperature}, {"seed", seed}, {"max_tokens", max_tokens}};
}

std::string GenerationParams::fingerprint() const { return sha256_hex(to_json().dump()); }

std::string GenerationRequest::fixture_key() const {
  json j = {{"kind", to_string(kind)}, {"prompt", prompt}, {"params", params.to_json()}};
  return sha256_hex(j.dump());
}

ReplayBackend::ReplayBackend(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) {
    throw Error(ErrorKind::configuration, "replay fixture directory '" + dir_.string() + "' does not exist");
  }
}

GenerationResult ReplayBackend::generate(const GenerationRequest& request) {
  auto key = request.fixture_key();
  auto path = dir_ / (key + ".json");
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::fixture_miss,
                "no fixture for request hash " + key + " (kind " + std::string(to_string(request.kind)) + ")",
                request.prompt);
  }
  json doc = json::parse(read_text_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("output_text") || !doc["output_text"].is_string()) {
    throw Error(ErrorKind::protocol, "malformed fixture '" + path.string() + "'");
  }
  GenerationResult r;
  r.output_text = doc["output_text"].get<std::string>();
  const json usage = doc.value("usage", json::object());
  r.prompt_tokens = usage.value("prompt_tokens", std::int64_t{0});
  r.completion_tokens = usage.value("completion_tokens", std::int64_t{0});
  if (r.prompt_tokens < 0 || r.completion_tokens < 0) {
    throw Error(ErrorKind::protocol, "fixture '" + path.string() + "' has negative token counts");
  }
  r.backend_id = id();
  return r;
}

CannedBackend::CannedBackend(const json& document) {
  if (!document.is_object()) throw Error(ErrorKind::configuration, "canned responses must be a JSON object");
  for (auto it = document.begin(); it != document.end(); ++it) {
    auto kind = parse_generation_kind(it.key());
    if (!it->is_array()) throw Error(ErrorKind::configuration, "canned '" + it.key() + "' must be an array");
    auto& list = responses_[kind];
    for (const auto& entry : *it) {
      Response r;
      if (entry.is_string()) {
        r.text = entry.get<std::string>();
      } else if (entry.is_object() && entry.contains("output_text")) {
        r.text = entry["output_text"].get<std::string>();
        if (entry.contains("prompt_tokens")) r.prompt_tokens = entry["prompt_tokens"].get<std::int64_t>();
        if (entry.contains("completion_tokens")) r.completion_tokens = entry["completion_tokens"].get<std::int64_t>();
      } else {
        throw Error(ErrorKind::configuration, "canned '" + it.key() + "' entries must be strings or objects");
      }
      list.push_back(std::move(r));
    }
  }
}

std::shared_ptr<CannedBackend> CannedBackend::from_file(const std::filesystem::path& file) {
  json doc = json::parse(read_text_file(file), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorKind::parse, "canned responses '" + file.string() + "' are not valid JSON");
  return std::make_shared<CannedBackend>(doc);
}

GenerationResult CannedBackend::generate(const GenerationRequest& request) {
  std::lock_guard lock(mu_);
  auto it = responses_.find(request.kind);
  if (it == responses_.end() || it->second.empty()) {
    throw Error(ErrorKind::fixture_miss, "no canned response for kind " + std::string(to_string(request.kind)),
                request.prompt);
  }
  auto& cursor = cursor_[request.kind];
  const auto& resp = it->second[std::min(cursor, it->second.size() - 1)];
  ++cursor;
  GenerationResult r;
  r.output_text = resp.text;
  r.prompt_tokens = resp.prompt_tokens.value_or(estimate_tokens(request.prompt));
  r.completion_tokens = resp.completion_tokens.value_or(estimate_tokens(resp.text));
  r.backend_id = id();
  return r;
}

void write_fixture(const std::filesystem::path& dir, const GenerationRequest& request,
                   const GenerationResult& result) {
  json doc = {{"request", {{"kind", to_string(request.kind)},
                           {"prompt_sha256", sha256_hex(request.prompt)},
                           {"params", request.params.to_json()}}},
              {"output_text", result.output_text},
              {"usage", {{"prompt_tokens", result.prompt_tokens}, {"completion_tokens", result.completion_tokens}}}};
  const auto file = dir / (request.fixture_key() + ".json");
  if (std::filesystem::exists(file)) {
    // Replay maps one request to one output; a second, different answer to
    // the same request cannot be represented.
    auto existing = json::parse(read_text_file(file), nullptr, false);
    if (!existing.is_discarded() && existing.value("output_text", std::string{}) != result.output_text) {
      throw Error(ErrorKind::integrity, "fixture " + request.fixture_key() +
                                            " already holds a different output for the same request");
    }
  }
  write_file_atomic(file, doc.dump(2) + "\n");
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

GenerationResult RecordingBackend::generate(const GenerationRequest& request) {
  auto result = inner_->generate(request);
  write_fixture(dir_, request, result);
  return result;
}

Gateway::Gateway(std::shared_ptr<Backend> backend, GenerationParams params)
    : backend_(std::move(backend)), params_(std::move(params)) {
  if (!backend_) throw Error(ErrorKind::configuration, "gateway needs a backend");
}

GenerationResult Gateway::generate(GenerationKind kind, std::string prompt) {
  GenerationRequest request{kind, std::move(prompt), params_};
  auto started = std::chrono::steady_clock::now();
  auto result = backend_->generate(request);
  if (result.latency == Millis{0}) {
    result.latency = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - started);
  }
  std::lock_guard lock(mu_);
  totals_.prompt += result.prompt_tokens;
  totals_.completion += result.completion_tokens;
  ++calls_;
  return result;
}

TokenUsage Gateway::totals() const {
  std::lock_guard lock(mu_);
  return totals_;
}

std::size_t Gateway::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::optional<std::string> first_code_block(std::string_view text) {
  auto lines = split_lines(text);
  std::optional<std::size_t> open;
  std::string fence;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string t = trim(lines[i]);
    if (!open) {
      if (t.rfind("```", 0) == 0 || t.rfind("~~~", 0) == 0) {
        open = i;
        fence = t.substr(0, 3);
      }
    } else if (t == fence || (t.rfind(fence, 0) == 0 && t.find_first_not_of(fence[0]) == std::string::npos)) {
      std::string body;
      for (std::size_t k = *open + 1; k < i; ++k) {
        body += lines[k];
        body += '\n';
      }
      return body;
    }
  }
  return std::nullopt;
}

ExtractedTests extract_tests(std::string_view output_text, const RunnerProfile& profile, TestOrigin origin,
                             Timestamp created_at) {
  auto block = first_code_block(output_text);
  if (!block) throw Error(ErrorKind::extraction, "no fenced code block in generated output", std::string(output_text));
  std::regex def_re(profile.test_def_pattern);
  auto lines = split_lines(*block);

  // Each line belongs to the preamble, to one test, or is dropped (a
  // `__main__` guard). A non-blank line at the top indentation that is not a
  // test definition hands ownership back to the preamble.
  constexpr long kPreamble = -1;
  constexpr long kDropped = -2;
  std::optional<std::string> top_indent;
  for (auto line : lines) {
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_search(line.begin(), line.end(), m, def_re)) {
      top_indent = m.size() > 2 ? m[1].str() : std::string{};
      break;
    }
  }
  if (!top_indent) {
    throw Error(ErrorKind::extraction, "no test functions found in generated code block", std::string(output_text));
  }
  std::vector<std::string> names;
  std::vector<long> owner(lines.size(), kPreamble);
  long current = kPreamble;
  // Indentation of an open `if __name__` guard; its whole block is dropped.
  std::optional<std::size_t> guard_indent;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (guard_indent) {
      std::string t = trim(lines[i]);
      auto lead = lines[i].find_first_not_of(" \t");
      if (t.empty() || lead > *guard_indent) {
        owner[i] = kDropped;
        continue;
      }
      guard_indent.reset();
    }
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_search(lines[i].begin(), lines[i].end(), m, def_re) &&
        (m.size() > 2 ? m[1].str() : std::string{}) == *top_indent) {
      names.push_back(m.size() > 2 ? m[2].str() : m[1].str());
      current = static_cast<long>(names.size()) - 1;
      // Decorators directly above the definition belong to the test.
      for (std::size_t k = i; k > 0 && trim(lines[k - 1]).rfind('@', 0) == 0; --k) owner[k - 1] = current;
      owner[i] = current;
      continue;
    }
    std::string t = trim(lines[i]);
    auto lead = lines[i].find_first_not_of(" \t");
    if (!t.empty() && t[0] != '#' && lead <= top_indent->size()) {
      bool main_guard = t.rfind("if __name__", 0) == 0;
      bool class_wrapper = lead < top_indent->size() && t.rfind("class ", 0) == 0;
      current = (main_guard || class_wrapper) ? kDropped : kPreamble;
      if (main_guard) guard_indent = lead;
    }
    owner[i] = current;
  }
  if (names.empty()) {
    throw Error(ErrorKind::extraction, "no test functions found in generated code block", std::string(output_text));
  }

  auto dedent = [&](std::string_view line) -> std::string {
    if (line.substr(0, top_indent->size()) == *top_indent) return std::string(line.substr(top_indent->size()));
    return std::string(line);
  };

  ExtractedTests out;
  std::string preamble;
  std::vector<std::string> bodies(names.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (owner[i] == kPreamble) {
      preamble += dedent(lines[i]) + "\n";
    } else if (owner[i] >= 0) {
      bodies[static_cast<std::size_t>(owner[i])] += dedent(lines[i]) + "\n";
    }
  }
  if (!trim(preamble).empty()) out.preamble = trim(preamble) + "\n";

  std::set<std::string> seen;
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::string body = trim_trailing_blank_lines(std::move(bodies[k])) + "\n";
    if (!seen.insert(body).second) continue;
    out.tests.push_back(TestCase::make(names[k], std::move(body), origin, created_at));
  }
  return out;
}

std::string extract_function_source(std::string_view output_text) {
  auto block = first_code_block(output_text);
  std::string source = block ? *block : trim(output_text) + "\n";
  if (trim(source).empty()) {
    throw Error(ErrorKind::extraction, "generated function is empty", std::string(output_text));
  }
  return source;
}

}  // namespace specloop
