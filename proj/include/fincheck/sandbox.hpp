#pragma once

#include <fcntl.h>
#include <sched.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/time.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <grp.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fincheck/metrics.hpp"
#include "fincheck/task_model.hpp"

namespace fincheck {

/// Runner configuration for foreign-program scoring. The command
/// templates take {program} and {fixture} placeholders.
struct SandboxConfig {
  std::string run_template;                      // e.g. "python3 {program} {fixture}"
  std::optional<std::string> compile_template;   // e.g. "python3 -m py_compile {program}"
  double time_limit_seconds = 5.0;
  long memory_limit_mb = 512;
  std::string program_filename = "candidate.py";
  std::string work_root;  // defaults to a fresh directory under /tmp
};

struct SandboxUnavailableError : std::runtime_error {
  explicit SandboxUnavailableError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

constexpr uid_t kUnprivilegedUid = 65534;  // nobody
constexpr gid_t kUnprivilegedGid = 65534;

struct RunOutcome {
  int exit_code = -1;
  bool timed_out = false;
  bool signaled = false;
  double wall_seconds = 0.0;
  std::string stdout_text;
};

inline std::string render_command(const std::string& tmpl, const std::string& program,
                                  const std::string& fixture) {
  std::string out = tmpl;
  auto replace_all = [&out](std::string_view key, const std::string& value) {
    size_t pos = 0;
    while ((pos = out.find(key, pos)) != std::string::npos) {
      out.replace(pos, key.size(), value);
      pos += value.size();
    }
  };
  replace_all("{program}", program);
  replace_all("{fixture}", fixture);
  return out;
}

inline std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// fork/exec with resource limits, a dedicated process group, output
/// capture, wall-clock watchdog, and (when root) privilege drop to
/// nobody so 0600 files outside the sandbox directory stay unreadable.
inline RunOutcome run_limited(const std::string& command, const std::string& workdir,
                              double time_limit_s, long memory_limit_mb) {
  std::string out_path = workdir + "/stdout.txt";
  std::string err_path = workdir + "/stderr.txt";

  pid_t pid = fork();
  if (pid < 0) throw SandboxUnavailableError("fork failed: " + std::string(strerror(errno)));
  if (pid == 0) {
    setpgid(0, 0);
    if (chdir(workdir.c_str()) != 0) _exit(127);

    int devnull = open("/dev/null", O_RDONLY);
    int out_fd = open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    int err_fd = open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (devnull < 0 || out_fd < 0 || err_fd < 0) _exit(127);
    dup2(devnull, 0);
    dup2(out_fd, 1);
    dup2(err_fd, 2);

    rlimit cpu{};
    cpu.rlim_cur = cpu.rlim_max = static_cast<rlim_t>(std::ceil(time_limit_s)) + 1;
    setrlimit(RLIMIT_CPU, &cpu);
    rlimit mem{};
    mem.rlim_cur = mem.rlim_max = static_cast<rlim_t>(memory_limit_mb) * 1024 * 1024;
    setrlimit(RLIMIT_AS, &mem);
    rlimit core{};
    core.rlim_cur = core.rlim_max = 0;
    setrlimit(RLIMIT_CORE, &core);
    rlimit fsize{};
    fsize.rlim_cur = fsize.rlim_max = 64ull * 1024 * 1024;
    setrlimit(RLIMIT_FSIZE, &fsize);

#ifdef CLONE_NEWNET
    unshare(CLONE_NEWNET);  // best effort; container kernels may refuse
#endif
    if (geteuid() == 0) {
      if (setgroups(0, nullptr) != 0 || setgid(kUnprivilegedGid) != 0 ||
          setuid(kUnprivilegedUid) != 0)
        _exit(126);
    }
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }

  setpgid(pid, pid);  // parent-side too; whichever runs first wins
  RunOutcome outcome;
  auto start = std::chrono::steady_clock::now();
  const auto deadline = start + std::chrono::duration<double>(time_limit_s);
  int status = 0;
  for (;;) {
    pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR)
      throw SandboxUnavailableError("waitpid failed: " + std::string(strerror(errno)));
    if (std::chrono::steady_clock::now() >= deadline) {
      outcome.timed_out = true;
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      break;
    }
    usleep(2000);
  }
  outcome.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (WIFEXITED(status)) {
    outcome.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    outcome.signaled = true;
    outcome.exit_code = 128 + WTERMSIG(status);
    if (WTERMSIG(status) == SIGXCPU || WTERMSIG(status) == SIGKILL) outcome.timed_out |= true;
  }
  outcome.stdout_text = read_all(out_path);
  return outcome;
}

inline std::string trim_copy(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline bool outputs_match(const std::string& compare, const std::string& actual,
                          const std::string& expected) {
  if (compare == "numeric") {
    try {
      double a = std::stod(trim_copy(actual));
      double b = std::stod(trim_copy(expected));
      return std::fabs(a - b) <= 1e-9 * std::max(1.0, std::fabs(b));
    } catch (...) {
      return false;
    }
  }
  if (compare == "verdict") {
    // Last nonempty line carries the verdict token.
    std::string t = trim_copy(actual);
    auto nl = t.find_last_of('\n');
    std::string last = nl == std::string::npos ? t : trim_copy(t.substr(nl + 1));
    return last == expected;
  }
  return trim_copy(actual) == trim_copy(expected);
}

inline std::string make_workdir(const SandboxConfig& config) {
  namespace fs = std::filesystem;
  std::string root = config.work_root;
  if (root.empty()) root = "/tmp/fincheck-sandbox";
  std::error_code ec;
  fs::create_directories(root, ec);
  std::string tmpl = root + "/run-XXXXXX";
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  if (!mkdtemp(buf.data()))
    throw SandboxUnavailableError("cannot create sandbox directory under " + root);
  std::string dir(buf.data());
  chmod(dir.c_str(), 0777);  // the dropped-privilege child needs a writable cwd
  return dir;
}

}  // namespace detail

/// Executes a foreign candidate program against a task's unit tests in
/// a subprocess sandbox: fresh working directory, CPU/memory rlimits,
/// wall-clock kill, privilege drop when root. The candidate sees only
/// its program file and the fixture path; 0600 files elsewhere stay
/// unreadable. Compile-phase failure (when a compile template is
/// configured) is CompileFail; a failing or crashing run is TestFail;
/// overrunning the wall clock is Timeout.
inline SampleOutcome run_sandboxed(const std::string& candidate_text, const CodeTask& task,
                                   const SandboxConfig& config,
                                   const std::string& fixture_base_dir) {
  namespace fs = std::filesystem;
  if (config.run_template.find("{program}") == std::string::npos)
    throw SandboxUnavailableError("run template lacks {program} placeholder");
  if (!fs::exists("/bin/sh")) throw SandboxUnavailableError("/bin/sh not available");

  SampleOutcome outcome;
  outcome.task_id = task.id;
  std::string workdir = detail::make_workdir(config);
  std::string program_path = workdir + "/" + config.program_filename;
  {
    std::ofstream out(program_path, std::ios::binary);
    if (!out) throw SandboxUnavailableError("cannot write candidate program");
    out << candidate_text;
  }
  chmod(program_path.c_str(), 0644);

  double total_wall = 0.0;
  if (config.compile_template) {
    std::string cmd = detail::render_command(*config.compile_template, program_path, "");
    auto run = detail::run_limited(cmd, workdir, config.time_limit_seconds,
                                   config.memory_limit_mb);
    total_wall += run.wall_seconds;
    if (run.timed_out) {
      outcome.status = SampleStatus::Timeout;
      outcome.wall_seconds = total_wall;
      return outcome;
    }
    if (run.exit_code != 0) {
      outcome.status = SampleStatus::CompileFail;
      outcome.wall_seconds = total_wall;
      return outcome;
    }
  }

  bool all_passed = true;
  bool timed_out = false;
  for (const auto& test : task.tests) {
    fs::path fixture = fs::path(fixture_base_dir) / test.fixture;
    std::string cmd = detail::render_command(config.run_template, program_path,
                                             fs::absolute(fixture).string());
    auto run = detail::run_limited(cmd, workdir, config.time_limit_seconds,
                                   config.memory_limit_mb);
    total_wall += run.wall_seconds;
    TestResult result;
    if (run.timed_out) {
      timed_out = true;
      result.passed = false;
      result.detail = "timeout";
    } else if (run.exit_code != 0) {
      result.passed = false;
      result.detail = "exit code " + std::to_string(run.exit_code);
    } else {
      result.passed = detail::outputs_match(task.compare, run.stdout_text, test.expected);
      if (!result.passed)
        result.detail = "expected \"" + test.expected + "\", got \"" +
                        detail::trim_copy(run.stdout_text) + "\"";
    }
    all_passed &= result.passed;
    outcome.per_test.push_back(std::move(result));
    if (timed_out) break;
  }
  outcome.wall_seconds = total_wall;
  outcome.status = timed_out          ? SampleStatus::Timeout
                   : all_passed       ? SampleStatus::Pass
                                      : SampleStatus::TestFail;
  return outcome;
}

}  // namespace fincheck
