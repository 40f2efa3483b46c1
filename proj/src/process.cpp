#include "specloop/process.hpp"

#include <fcntl.h>
#include <sched.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "specloop/error.hpp"

namespace specloop {

std::optional<std::filesystem::path> find_executable(std::string_view name) {
  auto executable = [](const std::filesystem::path& p) {
    struct stat st {};
    return ::stat(p.c_str(), &st) == 0 && S_ISREG(st.st_mode) && ::access(p.c_str(), X_OK) == 0;
  };
  if (name.empty()) return std::nullopt;
  if (name.find('/') != std::string_view::npos) {
    std::filesystem::path p{std::string(name)};
    if (executable(p)) return std::filesystem::absolute(p);
    return std::nullopt;
  }
  const char* path_env = std::getenv("PATH");
  std::string_view dirs = path_env ? path_env : "/usr/local/bin:/usr/bin:/bin";
  while (true) {
    auto colon = dirs.find(':');
    auto dir = dirs.substr(0, colon);
    if (!dir.empty()) {
      auto candidate = std::filesystem::path(std::string(dir)) / std::string(name);
      if (executable(candidate)) return candidate;
    }
    if (colon == std::string_view::npos) break;
    dirs.remove_prefix(colon + 1);
  }
  return std::nullopt;
}

ProcessResult run_process(const std::vector<std::string>& argv, const std::filesystem::path& cwd,
                          const std::vector<std::string>& env, const std::filesystem::path& stdout_file,
                          const std::filesystem::path& stderr_file, const ProcessLimits& limits) {
  if (argv.empty()) throw Error(ErrorKind::configuration, "empty command line");
  auto exe = find_executable(argv[0]);
  if (!exe) throw Error(ErrorKind::environment, "runner executable '" + argv[0] + "' not found");

  // Everything the child touches is prepared before fork: only
  // async-signal-safe calls happen between fork and exec.
  std::string exe_path = exe->string();
  std::string cwd_s = cwd.string();
  std::string out_s = stdout_file.string();
  std::string err_s = stderr_file.string();
  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  std::vector<char*> cenv;
  for (const auto& e : env) cenv.push_back(const_cast<char*>(e.c_str()));
  cenv.push_back(nullptr);

  int status_pipe[2];
  if (::pipe2(status_pipe, O_CLOEXEC) != 0) {
    throw Error(ErrorKind::environment, std::string("pipe failed: ") + std::strerror(errno));
  }

  auto started = std::chrono::steady_clock::now();
  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(status_pipe[0]);
    ::close(status_pipe[1]);
    throw Error(ErrorKind::environment, std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::close(status_pipe[0]);
    ::setpgid(0, 0);
    int out_fd = ::open(out_s.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    int err_fd = ::open(err_s.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    int null_fd = ::open("/dev/null", O_RDONLY);
    if (out_fd < 0 || err_fd < 0 || null_fd < 0) {
      int e = errno;
      (void)!::write(status_pipe[1], &e, sizeof e);
      ::_exit(127);
    }
    ::dup2(null_fd, 0);
    ::dup2(out_fd, 1);
    ::dup2(err_fd, 2);
    if (limits.memory_cap_bytes) {
      struct rlimit rl {};
      rl.rlim_cur = rl.rlim_max = *limits.memory_cap_bytes;
      ::setrlimit(RLIMIT_AS, &rl);
    }
    {
      struct rlimit rl {};
      auto secs = static_cast<rlim_t>(limits.wall_timeout.count() / 1000 + 2);
      rl.rlim_cur = rl.rlim_max = secs;
      ::setrlimit(RLIMIT_CPU, &rl);
      rl.rlim_cur = rl.rlim_max = 0;
      ::setrlimit(RLIMIT_CORE, &rl);
    }
    if (limits.isolate_network) (void)::unshare(CLONE_NEWNET);
    if (::chdir(cwd_s.c_str()) != 0) {
      int e = errno;
      (void)!::write(status_pipe[1], &e, sizeof e);
      ::_exit(127);
    }
    ::execve(exe_path.c_str(), cargv.data(), cenv.data());
    int e = errno;
    (void)!::write(status_pipe[1], &e, sizeof e);
    ::_exit(127);
  }
  ::close(status_pipe[1]);
  int child_errno = 0;
  ssize_t n;
  do {
    n = ::read(status_pipe[0], &child_errno, sizeof child_errno);
  } while (n < 0 && errno == EINTR);
  ::close(status_pipe[0]);

  ProcessResult result;
  int status = 0;
  auto deadline = started + limits.wall_timeout;
  while (true) {
    pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
      }
      result.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  // Reap stragglers left in the group by the child.
  ::kill(-pid, SIGKILL);
  result.elapsed = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - started);

  if (n == static_cast<ssize_t>(sizeof child_errno)) {
    throw Error(ErrorKind::environment,
                "cannot start runner '" + argv[0] + "': " + std::strerror(child_errno));
  }
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.term_signal = WTERMSIG(status);
  }
  return result;
}

TempDir::TempDir(std::string_view prefix) {
  auto tmpl = (std::filesystem::temp_directory_path() / (std::string(prefix) + "XXXXXX")).string();
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  if (::mkdtemp(buf.data()) == nullptr) {
    throw Error(ErrorKind::storage, std::string("mkdtemp failed: ") + std::strerror(errno));
  }
  path_ = buf.data();
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace specloop
