#include "memosearch/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>

extern char** environ;

namespace memosearch {

namespace {

constexpr std::size_t kStderrTail = 8192;
constexpr std::size_t kMaxLine = 64u << 20;

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK); }

int remaining_ms(Subprocess::Clock::time_point deadline) {
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Subprocess::Clock::now()).count();
  if (left < 0) return 0;
  return left > 1'000'000 ? 1'000'000 : static_cast<int>(left);
}

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

}  // namespace

Subprocess Subprocess::spawn(const std::vector<std::string>& argv, const std::filesystem::path& working_dir,
                             const std::vector<std::pair<std::string, std::string>>& extra_env) {
  if (argv.empty()) throw SpawnError("empty candidate command");

  // Environment and argv are built before fork; the child only calls
  // async-signal-safe functions.
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string kv(*e);
    auto eq = kv.find('=');
    if (eq != std::string::npos) env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const auto& [k, v] : extra_env) env[k] = v;
  std::vector<std::string> env_strings;
  for (const auto& [k, v] : env) env_strings.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);
  std::vector<std::string> args(argv);
  std::vector<char*> cargv;
  for (auto& a : args) cargv.push_back(a.data());
  cargv.push_back(nullptr);
  const std::string cwd = working_dir.string();

  int in_pair[2];   // socketpair: writes use MSG_NOSIGNAL, so a dead child cannot SIGPIPE us
  int out_pipe[2];
  int err_pipe[2];
  int exec_pipe[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0)
    throw SpawnError("cannot create stdin channel for " + argv.front());
  if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0 || ::pipe2(exec_pipe, O_CLOEXEC) != 0)
    throw SpawnError("cannot create pipes for " + argv.front());

  const pid_t pid = ::fork();
  if (pid < 0) throw SpawnError("fork failed for " + argv.front() + ": " + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in_pair[1], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(err_pipe[1], STDERR_FILENO);
    int err = 0;
    if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) {
      err = errno;
    } else {
      ::execvpe(cargv[0], cargv.data(), envp.data());
      err = errno;
    }
    [[maybe_unused]] auto n = ::write(exec_pipe[1], &err, sizeof err);
    ::_exit(127);
  }

  ::close(in_pair[1]);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  ::close(exec_pipe[1]);

  int child_errno = 0;
  ssize_t n;
  do {
    n = ::read(exec_pipe[0], &child_errno, sizeof child_errno);
  } while (n < 0 && errno == EINTR);
  ::close(exec_pipe[0]);
  if (n == static_cast<ssize_t>(sizeof child_errno)) {
    ::close(in_pair[0]);
    ::close(out_pipe[0]);
    ::close(err_pipe[0]);
    int status = 0;
    ::waitpid(pid, &status, 0);
    throw SpawnError("cannot start '" + argv.front() + "'" + (cwd.empty() ? "" : " in " + cwd) + ": " +
                     std::strerror(child_errno));
  }

  Subprocess p;
  p.pid_ = pid;
  p.stdin_fd_ = in_pair[0];
  p.stdout_fd_ = out_pipe[0];
  p.stderr_fd_ = err_pipe[0];
  set_nonblocking(p.stdin_fd_);
  set_nonblocking(p.stdout_fd_);
  set_nonblocking(p.stderr_fd_);
  return p;
}

Subprocess::Subprocess(Subprocess&& other) noexcept { *this = std::move(other); }

Subprocess& Subprocess::operator=(Subprocess&& other) noexcept {
  if (this != &other) {
    close_all();
    pid_ = std::exchange(other.pid_, -1);
    stdin_fd_ = std::exchange(other.stdin_fd_, -1);
    stdout_fd_ = std::exchange(other.stdout_fd_, -1);
    stderr_fd_ = std::exchange(other.stderr_fd_, -1);
    stdout_eof_ = other.stdout_eof_;
    exit_status_ = other.exit_status_;
    stdout_buffer_ = std::move(other.stdout_buffer_);
    stderr_tail_ = std::move(other.stderr_tail_);
  }
  return *this;
}

Subprocess::~Subprocess() { close_all(); }

void Subprocess::close_all() {
  if (pid_ > 0 && !exit_status_) {
    ::kill(pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
  pid_ = -1;
  close_fd(stdin_fd_);
  close_fd(stdout_fd_);
  close_fd(stderr_fd_);
}

bool Subprocess::write_all(std::string_view data, Clock::time_point deadline) {
  std::size_t off = 0;
  while (off < data.size()) {
    if (stdin_fd_ < 0) return false;
    ssize_t n = ::send(stdin_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n > 0) {
      off += static_cast<std::size_t>(n);
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
      if (Clock::now() >= deadline) return false;
      pollfd fds[2] = {{stdin_fd_, POLLOUT, 0}, {stderr_fd_, POLLIN, 0}};
      ::poll(fds, stderr_fd_ >= 0 ? 2 : 1, std::min(remaining_ms(deadline), 50));
      pump(0, false);
      continue;
    }
    return false;
  }
  return true;
}

void Subprocess::close_stdin() { close_fd(stdin_fd_); }

void Subprocess::pump(int timeout_ms, bool want_stdout) {
  pollfd fds[2];
  int count = 0;
  if (want_stdout && stdout_fd_ >= 0) fds[count++] = {stdout_fd_, POLLIN, 0};
  if (stderr_fd_ >= 0) fds[count++] = {stderr_fd_, POLLIN, 0};
  if (count == 0) return;
  int rc = ::poll(fds, count, timeout_ms);
  if (rc <= 0) return;
  char buf[65536];
  for (int i = 0; i < count; ++i) {
    if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
    const bool is_out = fds[i].fd == stdout_fd_;
    for (;;) {
      ssize_t n = ::read(fds[i].fd, buf, sizeof buf);
      if (n > 0) {
        if (is_out) {
          stdout_buffer_.append(buf, static_cast<std::size_t>(n));
        } else {
          stderr_tail_.append(buf, static_cast<std::size_t>(n));
          if (stderr_tail_.size() > kStderrTail) stderr_tail_.erase(0, stderr_tail_.size() - kStderrTail);
        }
        continue;
      }
      if (n < 0 && errno == EINTR) continue;
      if (n == 0) {
        if (is_out) {
          stdout_eof_ = true;
          close_fd(stdout_fd_);
        } else {
          close_fd(stderr_fd_);
        }
      }
      break;
    }
  }
}

Subprocess::ReadStatus Subprocess::read_line(std::string& line, Clock::time_point deadline) {
  for (;;) {
    auto nl = stdout_buffer_.find('\n');
    if (nl != std::string::npos) {
      line = stdout_buffer_.substr(0, nl);
      stdout_buffer_.erase(0, nl + 1);
      return ReadStatus::line;
    }
    if (stdout_eof_ || stdout_buffer_.size() > kMaxLine) return ReadStatus::eof;
    const int wait = remaining_ms(deadline);
    if (wait == 0 && Clock::now() >= deadline) {
      pump(0, true);
      if (stdout_buffer_.find('\n') != std::string::npos || stdout_eof_) continue;
      return ReadStatus::timeout;
    }
    pump(wait, true);
  }
}

std::optional<std::string> Subprocess::read_to_eof(Clock::time_point deadline) {
  while (!stdout_eof_) {
    if (Clock::now() >= deadline) return std::nullopt;
    pump(remaining_ms(deadline), true);
  }
  return std::exchange(stdout_buffer_, {});
}

std::optional<int> Subprocess::wait(Clock::time_point deadline) {
  if (exit_status_) return exit_status_;
  if (pid_ <= 0) return std::nullopt;
  for (;;) {
    int status = 0;
    pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
      return exit_status_;
    }
    if (r < 0 && errno != EINTR) return std::nullopt;
    if (Clock::now() >= deadline) return std::nullopt;
    pump(std::min(remaining_ms(deadline), 10), true);
  }
}

void Subprocess::kill() {
  if (pid_ > 0 && !exit_status_) {
    ::kill(pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    exit_status_ = 128 + SIGKILL;
  }
}

bool Subprocess::running() {
  if (exit_status_ || pid_ <= 0) return false;
  int status = 0;
  pid_t r = ::waitpid(pid_, &status, WNOHANG);
  if (r == pid_) {
    exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    return false;
  }
  return true;
}

}  // namespace memosearch
