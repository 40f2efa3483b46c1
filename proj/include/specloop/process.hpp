#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specloop/time.hpp"

namespace specloop {

struct ProcessLimits {
  Millis wall_timeout{30'000};
  /// RLIMIT_AS for the child; nullopt leaves the inherited limit.
  std::optional<std::size_t> memory_cap_bytes;
  /// Best effort: a fresh network namespace when the kernel permits it.
  bool isolate_network = true;
};

struct ProcessResult {
  int exit_code = -1;  // -1 when terminated by a signal
  int term_signal = 0;
  bool timed_out = false;
  Millis elapsed{0};
};

/// Resolves a bare command name against PATH; absolute or relative paths are
/// checked directly.
std::optional<std::filesystem::path> find_executable(std::string_view name);

/// Runs argv in its own process group with stdout/stderr redirected to files.
/// On timeout the whole group is killed. Throws Error{environment} if the
/// executable cannot be found or started.
ProcessResult run_process(const std::vector<std::string>& argv, const std::filesystem::path& cwd,
                          const std::vector<std::string>& env, const std::filesystem::path& stdout_file,
                          const std::filesystem::path& stderr_file, const ProcessLimits& limits);

/// Temporary directory removed (recursively) on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view prefix = "specloop-");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace specloop
