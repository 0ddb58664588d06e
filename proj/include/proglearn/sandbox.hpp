#pragma once

#include <fcntl.h>
#include <grp.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "proglearn/datasets.hpp"
#include "proglearn/digest.hpp"

namespace proglearn {

struct Candidate {
  std::string source;
  std::string dedup_key;  // hex digest of the exact source bytes
};

inline Candidate make_candidate(std::string source) {
  Candidate c;
  c.dedup_key = sha256_hex(source);
  c.source = std::move(source);
  return c;
}

class SeenSet {
 public:
  // True when the candidate was new; false marks a duplicate.
  bool insert_if_new(const Candidate& c) { return keys_.insert(c.dedup_key).second; }
  std::size_t size() const { return keys_.size(); }

 private:
  std::unordered_set<std::string> keys_;
};

// Fixed harness appended below the candidate source. The candidate must define f;
// the driver feeds it one input line at a time and prints one 0/1 line per input.
inline constexpr const char* kGuestDriverVersion = "driver/1";
inline constexpr const char* kGuestDriver = R"PY(
import sys

def _drive():
    out = []
    for line in sys.stdin.read().splitlines():
        out.append('1' if f(line) else '0')
    sys.stdout.write('\n'.join(out))
    if out:
        sys.stdout.write('\n')

_drive()
)PY";

struct SandboxConfig {
  std::vector<std::string> run_command = {"python3", "{program}"};
  std::vector<std::string> compile_command = {"python3", "-m", "py_compile", "{program}"};
  int batch_timeout_ms = 10000;
  std::uint64_t memory_cap_bytes = 512ull << 20;
  std::vector<std::string> env_allowlist = {"PATH", "HOME", "LANG", "LC_ALL"};
  std::string jail_root;  // empty means the system temp directory
  std::string driver = kGuestDriver;
  std::string driver_version = kGuestDriverVersion;
  std::string program_filename = "guest_program.py";
};

enum class GuestFailure { none, compile_error, timeout, crash, malformed_output };

inline const char* guest_failure_name(GuestFailure f) {
  switch (f) {
    case GuestFailure::none: return "none";
    case GuestFailure::compile_error: return "compile_error";
    case GuestFailure::timeout: return "timeout";
    case GuestFailure::crash: return "crash";
    case GuestFailure::malformed_output: return "malformed_output";
  }
  return "none";
}

struct GuestRun {
  std::vector<std::optional<int>> outcomes;
  bool total = false;
  GuestFailure failure = GuestFailure::none;
  int exit_status = 0;
  bool timed_out = false;
  double wall_ms = 0.0;
  std::string stderr_tail;
};

namespace detail {

struct SpawnOutcome {
  int exit_status = -1;
  bool timed_out = false;
};

inline std::string substitute_program(const std::string& arg, const std::string& program) {
  std::string out = arg;
  auto at = out.find("{program}");
  if (at != std::string::npos) out.replace(at, 9, program);
  return out;
}

// Fork/exec with the working directory set to the jail, stdio redirected to files,
// an rlimit memory cap, a scrubbed environment, and a kill deadline. When the
// parent runs as root the child drops to nobody so the jail boundary is enforced
// by file modes rather than trust.
inline SpawnOutcome spawn_in_jail(const std::vector<std::string>& command,
                                  const std::filesystem::path& jail,
                                  const std::string& program_filename,
                                  const std::filesystem::path& stdin_file,
                                  const std::filesystem::path& stdout_file,
                                  const std::filesystem::path& stderr_file,
                                  const SandboxConfig& cfg, int timeout_ms) {
  int in_fd = stdin_file.empty() ? ::open("/dev/null", O_RDONLY)
                                 : ::open(stdin_file.c_str(), O_RDONLY);
  int out_fd = ::open(stdout_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  int err_fd = ::open(stderr_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (in_fd < 0 || out_fd < 0 || err_fd < 0) {
    if (in_fd >= 0) ::close(in_fd);
    if (out_fd >= 0) ::close(out_fd);
    if (err_fd >= 0) ::close(err_fd);
    throw std::runtime_error("sandbox: cannot open io files");
  }

  std::vector<std::string> argv_store;
  argv_store.reserve(command.size());
  for (const auto& a : command) argv_store.push_back(substitute_program(a, program_filename));
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  argv.push_back(nullptr);

  std::vector<std::string> env_store;
  for (const auto& key : cfg.env_allowlist) {
    if (const char* v = std::getenv(key.c_str())) env_store.push_back(key + "=" + v);
  }
  std::vector<char*> envp;
  for (auto& e : env_store) envp.push_back(e.data());
  envp.push_back(nullptr);

  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(in_fd);
    ::close(out_fd);
    ::close(err_fd);
    throw std::runtime_error("sandbox: fork failed");
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    if (::chdir(jail.c_str()) != 0) ::_exit(125);
    ::dup2(in_fd, 0);
    ::dup2(out_fd, 1);
    ::dup2(err_fd, 2);
    ::close(in_fd);
    ::close(out_fd);
    ::close(err_fd);
    rlimit mem{cfg.memory_cap_bytes, cfg.memory_cap_bytes};
    ::setrlimit(RLIMIT_AS, &mem);
    rlimit core{0, 0};
    ::setrlimit(RLIMIT_CORE, &core);
    rlimit cpu{static_cast<rlim_t>(timeout_ms / 1000 + 2), static_cast<rlim_t>(timeout_ms / 1000 + 2)};
    ::setrlimit(RLIMIT_CPU, &cpu);
    if (::geteuid() == 0) {
      ::setgroups(0, nullptr);
      if (::setgid(65534) != 0 || ::setuid(65534) != 0) ::_exit(126);
    }
    ::execvpe(argv[0], argv.data(), envp.data());
    ::_exit(127);
  }

  ::close(in_fd);
  ::close(out_fd);
  ::close(err_fd);

  ::setpgid(pid, pid);

  SpawnOutcome out;
  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  int status = 0;
  bool reaped = false;
  for (;;) {
    pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) {
      reaped = true;
      break;
    }
    if (done < 0 && errno != EINTR) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      reaped = ::waitpid(pid, &status, 0) == pid;
      out.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (reaped && WIFEXITED(status)) {
    out.exit_status = WEXITSTATUS(status);
  } else if (reaped && WIFSIGNALED(status)) {
    out.exit_status = 128 + WTERMSIG(status);
  }
  return out;
}

inline std::string read_file_tail(const std::filesystem::path& p, std::size_t max_bytes) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "";
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string s = buf.str();
  if (s.size() > max_bytes) s = s.substr(s.size() - max_bytes);
  return s;
}

}  // namespace detail

// One jail per candidate: program written once, compiled once, then run per dataset.
class GuestSession {
 public:
  GuestSession(const Candidate& candidate, const SandboxConfig& cfg) : cfg_(cfg) {
    namespace fs = std::filesystem;
    fs::path root = cfg.jail_root.empty() ? fs::temp_directory_path() : fs::path(cfg.jail_root);
    std::string pattern = (root / "plguest-XXXXXX").string();
    std::vector<char> buf(pattern.begin(), pattern.end());
    buf.push_back('\0');
    if (!::mkdtemp(buf.data())) throw std::runtime_error("sandbox: mkdtemp failed");
    jail_ = fs::path(buf.data());
    ::chmod(jail_.c_str(), 0777);

    std::ofstream program(jail_ / cfg_.program_filename, std::ios::binary);
    program << candidate.source << "\n" << cfg_.driver;
    program.close();

    auto compiled = detail::spawn_in_jail(cfg_.compile_command, jail_, cfg_.program_filename,
                                          "", jail_ / "compile.out", jail_ / "compile.err",
                                          cfg_, cfg_.batch_timeout_ms);
    compile_ok_ = !compiled.timed_out && compiled.exit_status == 0;
    compile_stderr_ = detail::read_file_tail(jail_ / "compile.err", 500);
  }

  GuestSession(const GuestSession&) = delete;
  GuestSession& operator=(const GuestSession&) = delete;

  ~GuestSession() {
    std::error_code ec;
    std::filesystem::remove_all(jail_, ec);
  }

  bool compile_ok() const { return compile_ok_; }
  const std::string& compile_stderr() const { return compile_stderr_; }
  const std::filesystem::path& jail() const { return jail_; }

  GuestRun run(const std::vector<std::string>& inputs) {
    GuestRun res;
    res.outcomes.assign(inputs.size(), std::nullopt);
    if (!compile_ok_) {
      res.failure = GuestFailure::compile_error;
      res.stderr_tail = compile_stderr_;
      return res;
    }
    auto t0 = std::chrono::steady_clock::now();
    {
      std::ofstream in_file(jail_ / "stdin.txt", std::ios::binary);
      for (const auto& line : inputs) in_file << line << "\n";
    }
    auto spawned = detail::spawn_in_jail(cfg_.run_command, jail_, cfg_.program_filename,
                                         jail_ / "stdin.txt", jail_ / "stdout.txt",
                                         jail_ / "stderr.txt", cfg_, cfg_.batch_timeout_ms);
    res.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    res.exit_status = spawned.exit_status;
    res.timed_out = spawned.timed_out;
    res.stderr_tail = detail::read_file_tail(jail_ / "stderr.txt", 500);

    std::ifstream out_file(jail_ / "stdout.txt", std::ios::binary);
    std::string line;
    std::size_t i = 0;
    bool malformed = false;
    while (std::getline(out_file, line)) {
      if (i >= inputs.size() || (line != "0" && line != "1")) {
        malformed = true;
        break;
      }
      res.outcomes[i++] = (line == "1") ? 1 : 0;
    }
    for (std::size_t j = i; j < res.outcomes.size(); ++j) res.outcomes[j] = std::nullopt;

    if (spawned.timed_out) {
      res.failure = GuestFailure::timeout;
    } else if (spawned.exit_status != 0) {
      res.failure = GuestFailure::crash;
    } else if (malformed || i != inputs.size()) {
      res.failure = GuestFailure::malformed_output;
    } else {
      res.failure = GuestFailure::none;
      res.total = true;
    }
    if (!res.total) {
      // a failed batch forfeits every outcome, not only the unread tail
      for (auto& o : res.outcomes) o = std::nullopt;
    }
    return res;
  }

 private:
  SandboxConfig cfg_;
  std::filesystem::path jail_;
  bool compile_ok_ = false;
  std::string compile_stderr_;
};

inline GuestRun run_guest(const Candidate& candidate, const std::vector<std::string>& inputs,
                          const SandboxConfig& cfg) {
  GuestSession session(candidate, cfg);
  return session.run(inputs);
}

struct VerificationReport {
  bool compile_ok = false;
  bool total = false;
  std::optional<double> err_train;
  std::optional<double> err_val;
  std::vector<std::optional<int>> train_outcomes;
  std::vector<std::optional<int>> val_outcomes;
  GuestFailure failure = GuestFailure::none;
  double wall_ms = 0.0;
  std::string stderr_tail;
};

// Mean disagreement between defined outcomes and labels. Calling this with any
// undefined outcome is a contract violation.
inline double empirical_error(const std::vector<std::optional<int>>& outcomes,
                              const LabeledDataset& data) {
  if (outcomes.size() != data.samples.size())
    throw std::invalid_argument("empirical_error: size mismatch");
  if (outcomes.empty()) throw std::invalid_argument("empirical_error: empty dataset");
  long wrong = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].has_value()) throw std::invalid_argument("empirical_error: undefined outcome");
    wrong += *outcomes[i] != data.samples[i].label;
  }
  return static_cast<double>(wrong) / static_cast<double>(outcomes.size());
}

// Compile once, then evaluate on train and validation through the wire protocol.
// Errors are defined only when every outcome on both datasets is defined.
inline VerificationReport check_and_evaluate(const Candidate& candidate,
                                             const LabeledDataset& train,
                                             const LabeledDataset& val,
                                             const SandboxConfig& cfg) {
  VerificationReport rep;
  auto t0 = std::chrono::steady_clock::now();
  GuestSession session(candidate, cfg);
  rep.compile_ok = session.compile_ok();
  rep.train_outcomes.assign(train.samples.size(), std::nullopt);
  rep.val_outcomes.assign(val.samples.size(), std::nullopt);
  if (!rep.compile_ok) {
    rep.failure = GuestFailure::compile_error;
    rep.stderr_tail = session.compile_stderr();
    rep.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rep;
  }

  std::vector<std::string> train_inputs, val_inputs;
  for (const auto& s : train.samples) train_inputs.push_back(s.input);
  for (const auto& s : val.samples) val_inputs.push_back(s.input);

  GuestRun train_run = session.run(train_inputs);
  rep.train_outcomes = train_run.outcomes;
  rep.failure = train_run.failure;
  rep.stderr_tail = train_run.stderr_tail;
  if (train_run.total) {
    GuestRun val_run = session.run(val_inputs);
    rep.val_outcomes = val_run.outcomes;
    if (val_run.failure != GuestFailure::none) {
      rep.failure = val_run.failure;
      rep.stderr_tail = val_run.stderr_tail;
    }
    rep.total = train_run.total && val_run.total;
  }
  if (rep.total) {
    rep.err_train = empirical_error(rep.train_outcomes, train);
    rep.err_val = empirical_error(rep.val_outcomes, val);
  }
  rep.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace proglearn
