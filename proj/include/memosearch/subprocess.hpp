#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "memosearch/common.hpp"

namespace memosearch {

class SpawnError : public SessionError {
 public:
  using SessionError::SessionError;
};

// A child process with its stdin/stdout/stderr connected to this process.
// All blocking operations take a deadline; nothing here waits forever.
class Subprocess {
 public:
  using Clock = std::chrono::steady_clock;

  enum class ReadStatus { line, timeout, eof };

  // Throws SpawnError when the executable cannot be started; the message
  // names the command.
  static Subprocess spawn(const std::vector<std::string>& argv, const std::filesystem::path& working_dir,
                          const std::vector<std::pair<std::string, std::string>>& extra_env = {});

  Subprocess(Subprocess&& other) noexcept;
  Subprocess& operator=(Subprocess&& other) noexcept;
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;
  ~Subprocess();

  // False when the child stopped reading before the deadline.
  bool write_all(std::string_view data, Clock::time_point deadline);
  void close_stdin();
  // Next newline-terminated line of stdout, without the newline.
  ReadStatus read_line(std::string& line, Clock::time_point deadline);
  // Everything remaining on stdout until EOF; nullopt on timeout.
  std::optional<std::string> read_to_eof(Clock::time_point deadline);

  // Exit status if the child ended before the deadline (128+signal when
  // killed by a signal).
  std::optional<int> wait(Clock::time_point deadline);
  void kill();
  bool running();
  int pid() const { return pid_; }
  std::string stderr_tail() const { return stderr_tail_; }

 private:
  Subprocess() = default;
  void pump(int timeout_ms, bool want_stdout);
  void close_all();

  int pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  int stderr_fd_ = -1;
  bool stdout_eof_ = false;
  std::optional<int> exit_status_;
  std::string stdout_buffer_;
  std::string stderr_tail_;
};

}  // namespace memosearch
