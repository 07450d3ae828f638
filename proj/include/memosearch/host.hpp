#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "memosearch/artifact.hpp"
#include "memosearch/episodes.hpp"

namespace memosearch {

inline constexpr int kProtocolVersion = 1;
inline constexpr const char* kArtifactRootEnv = "MEMO_ARTIFACT_ROOT";
inline constexpr std::chrono::milliseconds kDefaultCallTimeout{120'000};

enum class SessionState { starting, updating, frozen, retrieving, closed, crashed };
const char* to_string(SessionState state);

// One request/reply exchange. `request` holds the exact bytes written,
// newline included.
struct CallLogEntry {
  std::string method;
  std::string task_id;
  std::chrono::microseconds duration{0};
  std::string status;  // ok | error | timeout | malformed | exited
  std::string request;
  std::string reply;
};

// Moves one request line to a candidate and brings back one reply line.
class Transport {
 public:
  enum class Status { ok, timeout, closed };
  struct Reply {
    Status status = Status::ok;
    std::string line;
  };

  virtual ~Transport() = default;
  virtual Reply exchange(const std::string& request_line, std::chrono::milliseconds timeout) = 0;
  // Graceful end after shutdown was acknowledged; returns the exit code.
  virtual std::optional<int> finish(std::chrono::milliseconds timeout) = 0;
  virtual void terminate() = 0;
  virtual std::string diagnostics() const { return {}; }
};

// Reply handler for candidates that live inside this process ("builtin:"
// program refs). A nullopt reply simulates a silent, hung candidate; a
// closed status simulates a process exit.
class InProcessCandidate {
 public:
  virtual ~InProcessCandidate() = default;
  virtual Transport::Reply handle(const std::string& request_line) = 0;
};

std::unique_ptr<Transport> make_process_transport(const ProgramRef& program, const std::filesystem::path& artifact_root);
std::unique_ptr<Transport> make_in_process_transport(std::unique_ptr<InProcessCandidate> candidate);

struct SessionOptions {
  std::chrono::milliseconds call_timeout = kDefaultCallTimeout;
  std::filesystem::path artifact_root = ".";
};

// A live candidate speaking the line-delimited JSON protocol. Requests are
// serialized; the state machine is starting -> updating -> frozen ->
// retrieving -> closed, with crashed absorbing.
class CandidateSession {
 public:
  CandidateSession(std::string candidate_id, std::unique_ptr<Transport> transport,
                   std::chrono::milliseconds call_timeout);
  CandidateSession(const CandidateSession&) = delete;
  CandidateSession& operator=(const CandidateSession&) = delete;
  ~CandidateSession();

  // Sends hello and checks the protocol version. Called by start_session.
  void handshake();

  void update(const EpisodeRecorder& episode);
  void freeze();
  // Raw payload JSON; validation belongs to the caller.
  Json retrieve(const EpisodeRecorder& task);
  // Ends the process; safe in any state.
  void shutdown();

  SessionState state() const;
  std::vector<CallLogEntry> call_log() const;
  // Concatenation of every request written, in order.
  std::string transcript() const;
  Json hello_reply() const;
  std::string crash_detail() const;
  const std::string& candidate_id() const { return candidate_id_; }
  std::chrono::milliseconds call_timeout() const { return call_timeout_; }

 private:
  Json call(const std::string& method, const std::string& task_id, const Json& request);
  [[noreturn]] void crash(const std::string& detail);

  std::string candidate_id_;
  std::unique_ptr<Transport> transport_;
  std::chrono::milliseconds call_timeout_;
  mutable std::mutex mutex_;
  SessionState state_ = SessionState::starting;
  std::vector<CallLogEntry> log_;
  Json hello_reply_;
  std::string crash_detail_;
};

// Spawns (or instantiates, for builtin refs) the candidate and performs the
// handshake. Relative working directories resolve under the artifact root.
std::unique_ptr<CandidateSession> start_session(const CandidateArtifact& candidate, const SessionOptions& options);

// Names accepted after "builtin:".
std::vector<std::string> builtin_candidate_names();
std::unique_ptr<InProcessCandidate> make_builtin_candidate(const std::string& name);

}  // namespace memosearch
