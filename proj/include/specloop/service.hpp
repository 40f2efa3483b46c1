#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "specloop/config.hpp"
#include "specloop/error.hpp"
#include "specloop/session_engine.hpp"
#include "specloop/task_bank.hpp"

namespace specloop {

/// Spec for a task: `<spec_dir>/<task_id>.toml` when present, otherwise one
/// assembled from the record (title + statement as description, the
/// reference signature, function name taken from the signature).
ProblemSpec spec_for_task(const TaskRecord& task, const std::filesystem::path& spec_dir = {});

struct ServiceOptions {
  TaskPools pools;
  std::filesystem::path spec_dir;
  /// Called once per session so stateful backends are not shared.
  std::function<std::shared_ptr<Backend>()> backend_factory;
  GenerationParams params;
  SessionConfig config;
  PromptTemplates templates = PromptTemplates::builtin();
  /// Defaults to the harness.
  Executor executor;
  std::shared_ptr<const Clock> clock = std::make_shared<SystemClock>();
  /// Holds assignments.json and exported bundles.
  std::filesystem::path data_dir;
  std::string pseudonym_salt;
  std::uint64_t seed = 0;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// HTTP status for a library error kind.
int status_for(ErrorKind kind);

/// Transport-independent request handling. Thread-safe: requests for
/// different sessions run concurrently; a second mutating request for a
/// session whose previous one is still running gets 409 "busy".
class ServiceCore {
 public:
  explicit ServiceCore(ServiceOptions options);

  ApiResponse handle(std::string_view method, std::string_view path, std::string_view body);

  /// Budget enforcement for every idle session.
  void tick_all();

  std::vector<Assignment> history() const;
  std::size_t session_count() const;

 private:
  struct Entry {
    std::mutex mu;
    std::unique_ptr<SessionEngine> engine;
  };

  ApiResponse create_session(const nlohmann::json& body);
  ApiResponse with_session(const std::string& id, bool mutating,
                           const std::function<ApiResponse(SessionEngine&)>& fn);
  std::shared_ptr<Entry> lookup(const std::string& id) const;
  void persist_history() const;

  ServiceOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::vector<Assignment> history_;
  std::uint64_t next_session_ = 1;
};

/// JSON view of one session for clients.
nlohmann::json session_view(const SessionEngine& engine);

/// cpp-httplib front end plus a 1 Hz budget ticker.
class HttpService {
 public:
  HttpService(ServiceCore& core, std::string host, int port, std::filesystem::path static_dir = {});
  ~HttpService();

  /// Binds and serves on a background thread; returns the bound port
  /// (useful with port 0). Throws Error{configuration} if binding fails.
  int start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace specloop
