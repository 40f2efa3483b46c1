#include "specloop/telemetry.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "specloop/error.hpp"
#include "specloop/hashing.hpp"

namespace specloop {

using nlohmann::json;

namespace {

constexpr std::string_view kActionNames[] = {
    "session_start", "spec_loaded",  "produce_suite",       "explain_test",  "regenerate_test",
    "delete_test",   "edit_test",    "regenerate_suite",    "ask_function",  "regenerate_function",
    "run_tests",     "advice_generated", "function_viewed", "session_end",
};

constexpr std::string_view kKindNames[] = {"spec", "suite", "function", "advice", "report", "explanation"};

template <typename T>
std::optional<T> opt_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

std::string_view to_string(Actor a) { return a == Actor::user ? "user" : "system"; }

std::string_view to_string(Action a) { return kActionNames[static_cast<size_t>(a)]; }

Actor parse_actor(std::string_view text) {
  if (text == "user") return Actor::user;
  if (text == "system") return Actor::system;
  throw Error(ErrorKind::parse, "unknown actor '" + std::string(text) + "'");
}

Action parse_action(std::string_view text) {
  for (size_t i = 0; i < std::size(kActionNames); ++i) {
    if (kActionNames[i] == text) return static_cast<Action>(i);
  }
  throw Error(ErrorKind::parse, "unknown action '" + std::string(text) + "'");
}

json to_json(const SessionEvent& e) {
  json j;
  j["seq"] = e.seq;
  j["timestamp"] = format_timestamp(e.timestamp);
  j["session_id"] = e.session_id;
  j["actor"] = to_string(e.actor);
  j["action"] = to_string(e.action);
  j["target"] = e.target ? json(*e.target) : json(nullptr);
  j["payload_hash"] = e.payload_hash ? json(*e.payload_hash) : json(nullptr);
  if (e.tokens) {
    j["tokens"] = {{"prompt", e.tokens->prompt}, {"completion", e.tokens->completion}};
  } else {
    j["tokens"] = nullptr;
  }
  return j;
}

SessionEvent event_from_json(const json& j) {
  try {
    SessionEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.timestamp = parse_timestamp(j.at("timestamp").get<std::string>());
    e.session_id = j.at("session_id").get<std::string>();
    e.actor = parse_actor(j.at("actor").get<std::string>());
    e.action = parse_action(j.at("action").get<std::string>());
    e.target = opt_field<std::string>(j, "target");
    e.payload_hash = opt_field<std::string>(j, "payload_hash");
    if (auto t = j.find("tokens"); t != j.end() && !t->is_null()) {
      e.tokens = TokenUsage{t->at("prompt").get<std::int64_t>(), t->at("completion").get<std::int64_t>()};
    }
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::parse, std::string("malformed event: ") + ex.what());
  }
}

std::string to_jsonl(std::span<const SessionEvent> events) {
  std::string out;
  for (const auto& e : events) {
    out += to_json(e).dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<SessionEvent> parse_jsonl(std::string_view text) {
  std::vector<SessionEvent> out;
  size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(event_from_json(json::parse(line)));
    } catch (const json::exception& ex) {
      throw Error(ErrorKind::parse, "events line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

EventLog::EventLog(std::string session_id, Millis debounce_window)
    : session_id_(std::move(session_id)), window_(debounce_window) {}

bool EventLog::is_duplicate(Action action, const std::optional<std::string>& target, Timestamp at) const {
  if (!last_user_) return false;
  const auto& prev = events_[*last_user_];
  return prev.action == action && prev.target == target && at - prev.timestamp < window_;
}

bool EventLog::admit(Action action, const std::optional<std::string>& target, Timestamp at) {
  if (closed_) throw Error(ErrorKind::rejected, "session '" + session_id_ + "' is closed");
  if (is_duplicate(action, target, at)) {
    ++dropped_;
    return false;
  }
  return true;
}

bool EventLog::record(SessionEvent event) {
  if (closed_) throw Error(ErrorKind::rejected, "session '" + session_id_ + "' is closed");
  if (event.actor == Actor::user && is_duplicate(event.action, event.target, event.timestamp)) {
    ++dropped_;
    return false;
  }
  event.seq = events_.size() + 1;
  event.session_id = session_id_;
  events_.push_back(std::move(event));
  if (events_.back().actor == Actor::user) last_user_ = events_.size() - 1;
  return true;
}

std::string_view to_string(ArtifactKind k) { return kKindNames[static_cast<size_t>(k)]; }

ArtifactKind parse_artifact_kind(std::string_view text) {
  for (size_t i = 0; i < std::size(kKindNames); ++i) {
    if (kKindNames[i] == text) return static_cast<ArtifactKind>(i);
  }
  throw Error(ErrorKind::parse, "unknown artifact kind '" + std::string(text) + "'");
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::storage, "cannot write '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::storage, "cannot rename into '" + path.string() + "': " + ec.message());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::storage, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ArtifactStore::ArtifactStore(std::optional<std::filesystem::path> root) : root_(std::move(root)) {
  if (root_) {
    std::error_code ec;
    std::filesystem::create_directories(*root_, ec);
    if (ec) throw Error(ErrorKind::storage, "cannot create artifact dir '" + root_->string() + "'");
  }
}

std::string ArtifactStore::snapshot(std::string_view text, ArtifactKind kind) {
  std::string hash = sha256_hex(text);
  if (entries_.contains(hash)) return hash;
  if (root_) {
    auto path = *root_ / (hash + ".txt");
    if (!std::filesystem::exists(path)) write_file_atomic(path, text);
  }
  entries_.emplace(hash, Entry{std::string(text), kind});
  return hash;
}

const ArtifactStore::Entry* ArtifactStore::find(std::string_view hash) const {
  auto it = entries_.find(hash);
  return it == entries_.end() ? nullptr : &it->second;
}

void ArtifactStore::write_all(const std::filesystem::path& dir) const {
  for (const auto& [hash, entry] : entries_) write_file_atomic(dir / (hash + ".txt"), entry.text);
}

std::string_view to_string(Familiarity f) {
  switch (f) {
    case Familiarity::none: return "none";
    case Familiarity::low: return "low";
    case Familiarity::medium: return "medium";
    case Familiarity::high: return "high";
  }
  return "none";
}

std::string_view to_string(LlmUse u) {
  switch (u) {
    case LlmUse::never: return "never";
    case LlmUse::occasionally: return "occasionally";
    case LlmUse::frequently: return "frequently";
  }
  return "never";
}

namespace {

Familiarity parse_familiarity(const std::string& s, const char* field) {
  for (auto f : {Familiarity::none, Familiarity::low, Familiarity::medium, Familiarity::high}) {
    if (to_string(f) == s) return f;
  }
  throw Error(ErrorKind::validation, std::string("profile field '") + field + "' must be none|low|medium|high");
}

LlmUse parse_llm_use(const std::string& s) {
  for (auto u : {LlmUse::never, LlmUse::occasionally, LlmUse::frequently}) {
    if (to_string(u) == s) return u;
  }
  throw Error(ErrorKind::validation,
              "profile field 'prior_llm_codegen_use' must be never|occasionally|frequently");
}

}  // namespace

json to_json(const ParticipantProfile& p) {
  json j;
  j["participant_id"] = p.participant_id;
  j["programming_experience_years"] = p.programming_experience_years;
  j["python_familiarity"] = to_string(p.python_familiarity);
  j["prior_tdd_experience"] = to_string(p.prior_tdd_experience);
  j["prior_llm_codegen_use"] = to_string(p.prior_llm_codegen_use);
  if (p.post_task) {
    j["post_task"] = {{"likert_items", p.post_task->likert_items},
                      {"free_text", p.post_task->free_text},
                      {"free_text_needs_review", !p.post_task->free_text.empty()}};
  } else {
    j["post_task"] = nullptr;
  }
  return j;
}

ParticipantProfile profile_from_json(const json& j) {
  static const std::set<std::string> allowed = {"participant_id",       "programming_experience_years",
                                                "python_familiarity",   "prior_tdd_experience",
                                                "prior_llm_codegen_use", "post_task"};
  if (!j.is_object()) throw Error(ErrorKind::validation, "profile must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.contains(it.key())) {
      throw Error(ErrorKind::validation, "profile has unknown key '" + it.key() + "'");
    }
  }
  try {
    ParticipantProfile p;
    p.participant_id = j.at("participant_id").get<std::string>();
    p.programming_experience_years = j.at("programming_experience_years").get<int>();
    if (p.programming_experience_years < 0) {
      throw Error(ErrorKind::validation, "programming_experience_years must be >= 0");
    }
    p.python_familiarity = parse_familiarity(j.at("python_familiarity").get<std::string>(), "python_familiarity");
    p.prior_tdd_experience =
        parse_familiarity(j.at("prior_tdd_experience").get<std::string>(), "prior_tdd_experience");
    p.prior_llm_codegen_use = parse_llm_use(j.at("prior_llm_codegen_use").get<std::string>());
    if (auto pt = j.find("post_task"); pt != j.end() && !pt->is_null()) {
      PostTaskFeedback fb;
      fb.likert_items = pt->value("likert_items", std::vector<int>{});
      fb.free_text = pt->value("free_text", std::string{});
      for (int v : fb.likert_items) {
        if (v < 1 || v > 5) throw Error(ErrorKind::validation, "likert items must be in 1..5");
      }
      p.post_task = std::move(fb);
    }
    return p;
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::validation, std::string("malformed profile: ") + ex.what());
  }
}

std::string pseudonymize(std::string_view raw_identifier, std::string_view salt) {
  std::string material(salt);
  material += ':';
  material += raw_identifier;
  return "P-" + sha256_hex(material).substr(0, 12);
}

bool is_pseudonym(std::string_view id) {
  if (id.size() != 14 || id.substr(0, 2) != "P-") return false;
  for (char c : id.substr(2)) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

}  // namespace specloop
