#include "specloop/service.hpp"

#include <chrono>
#include <condition_variable>

#include <httplib.h>

#include "specloop/bundle.hpp"
#include "specloop/error.hpp"
#include "specloop/spec_model.hpp"
#include "specloop/toml.hpp"

namespace specloop {

namespace fs = std::filesystem;
using nlohmann::json;

ProblemSpec spec_for_task(const TaskRecord& task, const fs::path& spec_dir) {
  if (!spec_dir.empty()) {
    auto file = spec_dir / (task.task_id + ".toml");
    if (fs::is_regular_file(file)) return parse_spec(read_text_file(file));
  }
  // "def two_sum(nums, target) -> list" and "two_sum(nums, target)" both name two_sum.
  std::string sig = task.reference_signature;
  auto paren = sig.find('(');
  std::string head = sig.substr(0, paren);
  while (!head.empty() && (head.back() == ' ' || head.back() == '\t')) head.pop_back();
  auto space = head.find_last_of(" \t");
  std::string name = space == std::string::npos ? head : head.substr(space + 1);
  if (!is_identifier(name)) {
    throw Error(ErrorKind::validation,
                "task '" + task.task_id + "': cannot derive a function name from '" + task.reference_signature + "'");
  }
  std::string doc = "function_name = " + toml::quote(name) + "\n";
  doc += "signature = " + toml::quote(task.reference_signature) + "\n";
  doc += "description = " + toml::quote_block(task.title + "\n\n" + task.statement) + "\n";
  return parse_spec(doc);
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse:
    case ErrorKind::validation:
    case ErrorKind::usage:
    case ErrorKind::domain: return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::precondition:
    case ErrorKind::rejected:
    case ErrorKind::busy: return 409;
    case ErrorKind::budget_expired: return 410;
    case ErrorKind::debounced: return 429;
    case ErrorKind::transport:
    case ErrorKind::protocol:
    case ErrorKind::fixture_miss:
    case ErrorKind::extraction: return 502;
    case ErrorKind::integrity:
    case ErrorKind::configuration:
    case ErrorKind::environment:
    case ErrorKind::harness:
    case ErrorKind::storage: return 500;
  }
  return 500;
}

namespace {

ApiResponse error_response(const Error& e) {
  json body = {{"error", to_string(e.kind())}, {"message", e.what()}};
  if (!e.detail().empty()) body["detail"] = e.detail();
  return {status_for(e.kind()), body};
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == '/') {
      ++i;
      continue;
    }
    auto j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    out.emplace_back(path.substr(i, j - i));
    i = j;
  }
  return out;
}

json parse_body(std::string_view body) {
  if (body.find_first_not_of(" \t\r\n") == std::string_view::npos) return json::object();
  try {
    auto j = json::parse(body);
    if (!j.is_object()) throw Error(ErrorKind::validation, "request body must be a JSON object");
    return j;
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::parse, std::string("request body: ") + ex.what());
  }
}

std::optional<std::string> opt_str(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(ErrorKind::validation, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

bool opt_bool(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return false;
  if (!it->is_boolean()) throw Error(ErrorKind::validation, std::string("field '") + key + "' must be a boolean");
  return it->get<bool>();
}

}  // namespace

json session_view(const SessionEngine& engine) {
  const auto& s = engine.state();
  json function = nullptr;
  if (s.function) {
    function = {{"function_version", s.function->function_version},
                {"source", s.function->source},
                {"source_hash", s.function->source_hash},
                {"generated_from_suite", s.function->generated_from_suite}};
  }
  json report = nullptr;
  if (s.last_report) {
    report = to_json(*s.last_report);
    report["pass_rate"] = s.last_report->pass_rate();
    report["all_pass"] = s.last_report->all_pass();
  }
  auto events = engine.log().events();
  return {{"session_id", s.session_id},
          {"participant_id", s.participant_id},
          {"task_id", s.task_id},
          {"phase", to_string(s.phase)},
          {"outcome", to_string(s.outcome)},
          {"spec",
           {{"function_name", s.spec.function_name()},
            {"signature", s.spec.signature()},
            {"text", s.spec.raw_source()},
            {"source_hash", s.spec.source_hash()}}},
          {"suite", to_json(s.suite)},
          {"function", function},
          {"last_report", report},
          {"latest_advice", s.latest_advice ? json(*s.latest_advice) : json(nullptr)},
          {"remaining_budget_seconds", to_seconds(engine.remaining_budget())},
          {"event_count", events.size()},
          {"last_seq", events.empty() ? 0 : events.back().seq},
          {"dropped_duplicates", engine.log().dropped()}};
}

ServiceCore::ServiceCore(ServiceOptions options) : options_(std::move(options)) {
  if (!options_.backend_factory) throw Error(ErrorKind::configuration, "service needs a backend factory");
  if (!options_.clock) throw Error(ErrorKind::configuration, "service needs a clock");
  if (options_.pools.warmup.empty() || options_.pools.evaluation.empty()) {
    throw Error(ErrorKind::configuration, "service needs non-empty warm-up and evaluation pools");
  }
  if (!options_.data_dir.empty()) {
    std::error_code ec;
    fs::create_directories(options_.data_dir, ec);
    if (ec) throw Error(ErrorKind::storage, "cannot create " + options_.data_dir.string() + ": " + ec.message());
    auto file = options_.data_dir / "assignments.json";
    if (fs::is_regular_file(file)) {
      try {
        for (const auto& a : json::parse(read_text_file(file))) history_.push_back(assignment_from_json(a));
      } catch (const json::exception& ex) {
        throw Error(ErrorKind::parse, file.string() + ": " + ex.what());
      }
    }
  }
}

std::vector<Assignment> ServiceCore::history() const {
  std::lock_guard lock(mu_);
  return history_;
}

std::size_t ServiceCore::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

void ServiceCore::persist_history() const {
  if (options_.data_dir.empty()) return;
  json arr = json::array();
  for (const auto& a : history_) arr.push_back(to_json(a));
  write_file_atomic(options_.data_dir / "assignments.json", arr.dump(2) + "\n");
}

std::shared_ptr<ServiceCore::Entry> ServiceCore::lookup(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorKind::not_found, "no session '" + id + "'");
  return it->second;
}

ApiResponse ServiceCore::create_session(const json& body) {
  auto raw = opt_str(body, "participant_id");
  if (!raw || raw->empty()) throw Error(ErrorKind::validation, "participant_id is required");
  std::string pid;
  if (is_pseudonym(*raw)) {
    pid = *raw;
  } else {
    if (options_.pseudonym_salt.empty()) {
      throw Error(ErrorKind::validation, "raw participant ids need a configured pseudonym salt");
    }
    pid = pseudonymize(*raw, options_.pseudonym_salt);
  }
  const std::string which = opt_str(body, "task").value_or("evaluation");
  if (which != "evaluation" && which != "warmup") {
    throw Error(ErrorKind::validation, "task must be 'warmup' or 'evaluation'");
  }
  std::optional<ParticipantProfile> profile;
  if (auto it = body.find("profile"); it != body.end() && !it->is_null()) {
    profile = profile_from_json(*it);
    profile->participant_id = pid;
  }

  std::unique_lock lock(mu_);
  std::optional<Assignment> assignment;
  for (const auto& a : history_) {
    if (a.participant_id == pid) assignment = a;
  }
  if (!assignment) {
    assignment = assign_tasks(options_.pools, pid, history_, options_.seed + history_.size(), options_.clock->now());
    history_.push_back(*assignment);
    persist_history();
  }
  const std::string task_id = which == "warmup" ? assignment->warmup_task : assignment->evaluation_task;
  const TaskRecord* task = options_.pools.find(task_id);
  if (!task) throw Error(ErrorKind::not_found, "assigned task '" + task_id + "' is not in the pools");

  char id[32];
  std::snprintf(id, sizeof id, "S%05llu", static_cast<unsigned long long>(next_session_));
  SessionInit init;
  init.session_id = id;
  init.participant_id = pid;
  init.task_id = task_id;
  init.spec = spec_for_task(*task, options_.spec_dir);
  init.profile = profile;
  init.assignment = assignment;
  auto gateway = std::make_shared<Gateway>(options_.backend_factory(), options_.params);
  Executor exec = options_.executor ? options_.executor : harness_executor(options_.config);
  auto entry = std::make_shared<Entry>();
  entry->engine = std::make_unique<SessionEngine>(std::move(init), gateway, options_.clock, std::move(exec),
                                                  options_.config, options_.templates);
  sessions_[id] = entry;
  ++next_session_;
  json view = session_view(*entry->engine);
  return {201, {{"session", view}, {"assignment", to_json(*assignment)}}};
}

ApiResponse ServiceCore::with_session(const std::string& id, bool mutating,
                                      const std::function<ApiResponse(SessionEngine&)>& fn) {
  auto entry = lookup(id);
  std::unique_lock lock(entry->mu, std::defer_lock);
  if (mutating) {
    if (!lock.try_lock()) throw Error(ErrorKind::busy, "session '" + id + "' is busy with another request");
  } else {
    lock.lock();
  }
  return fn(*entry->engine);
}

void ServiceCore::tick_all() {
  std::vector<std::shared_ptr<Entry>> entries;
  {
    std::lock_guard lock(mu_);
    for (const auto& [_, e] : sessions_) entries.push_back(e);
  }
  for (const auto& e : entries) {
    std::unique_lock lock(e->mu, std::try_to_lock);
    if (lock.owns_lock()) e->engine->tick_budget();
  }
}

ApiResponse ServiceCore::handle(std::string_view method, std::string_view path, std::string_view raw_body) {
  try {
    const auto parts = split_path(path);
    const json body = parse_body(raw_body);
    if (parts.empty() || parts[0] != "sessions") throw Error(ErrorKind::not_found, "no route " + std::string(path));

    if (parts.size() == 1) {
      if (method == "POST") return create_session(body);
      throw Error(ErrorKind::not_found, "no route " + std::string(method) + " " + std::string(path));
    }
    const std::string& id = parts[1];
    auto ok = [](const SessionEngine& e, json extra = json::object()) {
      extra["session"] = session_view(e);
      return ApiResponse{200, extra};
    };

    if (parts.size() == 2 && method == "GET") {
      return with_session(id, false, [&](SessionEngine& e) { return ok(e); });
    }
    if (parts.size() == 3 && method == "POST" && parts[2] == "suite") {
      auto mode = opt_str(body, "mode");
      auto guidance = opt_str(body, "guidance");
      return with_session(id, true, [&](SessionEngine& e) {
        // Without a mode the request is a production, so that a repeated
        // click hits the duplicate-click gate instead of turning into a
        // regeneration.
        const bool produce = !mode || *mode == "produce";
        if (mode && *mode != "produce" && *mode != "regenerate") {
          throw Error(ErrorKind::validation, "mode must be 'produce' or 'regenerate'");
        }
        if (produce) {
          e.produce_suite();
        } else {
          CurationAction a;
          a.kind = CurationKind::regenerate_suite;
          a.guidance = guidance;
          e.curate(a);
        }
        return ok(e);
      });
    }
    if (parts.size() == 5 && method == "POST" && parts[2] == "tests") {
      const std::string& test_id = parts[3];
      const std::string& verb = parts[4];
      CurationAction a;
      if (verb == "explain") {
        a.kind = CurationKind::explain;
      } else if (verb == "regenerate") {
        a.kind = CurationKind::regenerate_test;
      } else if (verb == "delete") {
        a.kind = CurationKind::delete_test;
      } else {
        throw Error(ErrorKind::not_found, "no test action '" + verb + "'");
      }
      a.target_test_id = test_id;
      a.guidance = opt_str(body, "guidance");
      return with_session(id, true, [&](SessionEngine& e) {
        auto r = e.curate(a);
        json extra = json::object();
        if (r.explanation) extra["explanation"] = *r.explanation;
        return ok(e, extra);
      });
    }
    if (parts.size() == 4 && method == "PUT" && parts[2] == "tests") {
      CurationAction a;
      a.kind = CurationKind::edit_test;
      a.target_test_id = parts[3];
      a.body = opt_str(body, "body");
      return with_session(id, true, [&](SessionEngine& e) {
        e.curate(a);
        return ok(e);
      });
    }
    if (parts.size() == 3 && method == "POST" && parts[2] == "function") {
      const bool use_advice = opt_bool(body, "use_advice");
      auto mode = opt_str(body, "mode");
      if (mode && *mode != "ask" && *mode != "regenerate") {
        throw Error(ErrorKind::validation, "mode must be 'ask' or 'regenerate'");
      }
      return with_session(id, true, [&](SessionEngine& e) {
        const bool regenerate = mode && *mode == "regenerate";
        if (regenerate) {
          e.regenerate_function(use_advice);
        } else {
          e.ask_function();
        }
        return ok(e);
      });
    }
    if (parts.size() == 3 && method == "POST" && parts[2] == "advice") {
      return with_session(id, true, [&](SessionEngine& e) {
        auto advice = e.request_advice();
        return ok(e, {{"advice", advice}});
      });
    }
    if (parts.size() == 4 && method == "POST" && parts[2] == "events" && parts[3] == "view") {
      return with_session(id, true, [&](SessionEngine& e) {
        e.view_function();
        return ok(e);
      });
    }
    if (parts.size() == 3 && method == "POST" && parts[2] == "close") {
      return with_session(id, true, [&](SessionEngine& e) {
        e.close();
        return ok(e);
      });
    }
    if (parts.size() == 3 && method == "GET" && parts[2] == "export") {
      return with_session(id, false, [&](SessionEngine& e) {
        if (options_.data_dir.empty()) throw Error(ErrorKind::configuration, "service has no data_dir for bundles");
        auto dir = options_.data_dir / "bundles" / id;
        export_bundle(e, dir, options_.clock->now());
        auto verdict = verify_bundle(dir);
        return ApiResponse{200, {{"bundle_dir", dir.string()}, {"verified", verdict.ok()}, {"problems", verdict.problems}}};
      });
    }
    throw Error(ErrorKind::not_found, "no route " + std::string(method) + " " + std::string(path));
  } catch (const Error& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    return {500, {{"error", "internal"}, {"message", e.what()}}};
  }
}

struct HttpService::Impl {
  ServiceCore& core;
  std::string host;
  int port;
  httplib::Server server;
  std::thread listener;
  std::thread ticker;
  std::mutex tick_mu;
  std::condition_variable tick_cv;
  bool stopping = false;

  Impl(ServiceCore& c, std::string h, int p) : core(c), host(std::move(h)), port(p) {}

  void start_ticker() {
    ticker = std::thread([this] {
      std::unique_lock lock(tick_mu);
      while (!tick_cv.wait_for(lock, std::chrono::seconds(1), [this] { return stopping; })) {
        lock.unlock();
        core.tick_all();
        lock.lock();
      }
    });
  }
};

HttpService::HttpService(ServiceCore& core, std::string host, int port, fs::path static_dir)
    : impl_(std::make_unique<Impl>(core, std::move(host), port)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    auto r = impl_->core.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  const std::string pattern = R"(/sessions(/.*)?)";
  impl_->server.Get(pattern, handler);
  impl_->server.Post(pattern, handler);
  impl_->server.Put(pattern, handler);
  if (!static_dir.empty()) impl_->server.set_mount_point("/", static_dir.string());
}

HttpService::~HttpService() { stop(); }

int HttpService::start() {
  int bound = impl_->port == 0 ? impl_->server.bind_to_any_port(impl_->host)
                               : (impl_->server.bind_to_port(impl_->host, impl_->port) ? impl_->port : -1);
  if (bound < 0) {
    throw Error(ErrorKind::configuration,
                "cannot bind " + impl_->host + ":" + std::to_string(impl_->port) + " (port in use?)");
  }
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->start_ticker();
  return bound;
}

void HttpService::run() {
  if (!impl_->server.bind_to_port(impl_->host, impl_->port)) {
    throw Error(ErrorKind::configuration,
                "cannot bind " + impl_->host + ":" + std::to_string(impl_->port) + " (port in use?)");
  }
  impl_->start_ticker();
  impl_->server.listen_after_bind();
}

void HttpService::stop() {
  if (!impl_) return;
  {
    std::lock_guard lock(impl_->tick_mu);
    impl_->stopping = true;
  }
  impl_->tick_cv.notify_all();
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
  if (impl_->ticker.joinable()) impl_->ticker.join();
}

}  // namespace specloop
