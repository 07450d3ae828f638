#include "memosearch/host.hpp"

#include "memosearch/log.hpp"
#include "memosearch/reference_candidates.hpp"
#include "memosearch/subprocess.hpp"

namespace memosearch {

namespace {

using Clock = std::chrono::steady_clock;

class ProcessTransport : public Transport {
 public:
  explicit ProcessTransport(Subprocess process) : process_(std::move(process)) {}

  Reply exchange(const std::string& request_line, std::chrono::milliseconds timeout) override {
    const auto deadline = Clock::now() + timeout;
    if (!process_.write_all(request_line, deadline)) {
      return {process_.running() ? Status::timeout : Status::closed, {}};
    }
    std::string line;
    switch (process_.read_line(line, deadline)) {
      case Subprocess::ReadStatus::line: return {Status::ok, std::move(line)};
      case Subprocess::ReadStatus::timeout: return {Status::timeout, {}};
      case Subprocess::ReadStatus::eof: return {Status::closed, {}};
    }
    return {Status::closed, {}};
  }

  std::optional<int> finish(std::chrono::milliseconds timeout) override {
    process_.close_stdin();
    auto code = process_.wait(Clock::now() + timeout);
    if (!code) process_.kill();
    return code;
  }

  void terminate() override { process_.kill(); }

  std::string diagnostics() const override { return process_.stderr_tail(); }

 private:
  Subprocess process_;
};

class InProcessTransport : public Transport {
 public:
  explicit InProcessTransport(std::unique_ptr<InProcessCandidate> candidate) : candidate_(std::move(candidate)) {}

  Reply exchange(const std::string& request_line, std::chrono::milliseconds) override {
    if (closed_) return {Status::closed, {}};
    std::string line = request_line;
    if (!line.empty() && line.back() == '\n') line.pop_back();
    Reply r = candidate_->handle(line);
    if (r.status == Status::closed) closed_ = true;
    return r;
  }

  std::optional<int> finish(std::chrono::milliseconds) override {
    closed_ = true;
    return 0;
  }

  void terminate() override { closed_ = true; }

 private:
  std::unique_ptr<InProcessCandidate> candidate_;
  bool closed_ = false;
};

class BuiltinCandidate : public InProcessCandidate {
 public:
  explicit BuiltinCandidate(std::unique_ptr<reference::ProtocolServer> server) : server_(std::move(server)) {}

  Transport::Reply handle(const std::string& request_line) override {
    auto action = server_->handle(request_line);
    switch (action.kind) {
      case reference::ServerAction::Kind::reply: return {Transport::Status::ok, std::move(action.line)};
      case reference::ServerAction::Kind::hang: return {Transport::Status::timeout, {}};
      case reference::ServerAction::Kind::exit: return {Transport::Status::closed, {}};
    }
    return {Transport::Status::closed, {}};
  }

 private:
  std::unique_ptr<reference::ProtocolServer> server_;
};

}  // namespace

const char* to_string(SessionState state) {
  switch (state) {
    case SessionState::starting: return "starting";
    case SessionState::updating: return "updating";
    case SessionState::frozen: return "frozen";
    case SessionState::retrieving: return "retrieving";
    case SessionState::closed: return "closed";
    case SessionState::crashed: return "crashed";
  }
  return "crashed";
}

std::unique_ptr<Transport> make_process_transport(const ProgramRef& program, const std::filesystem::path& artifact_root) {
  namespace fs = std::filesystem;
  const fs::path root = fs::absolute(artifact_root);
  fs::path cwd = root;
  if (!program.working_dir.empty()) {
    fs::path wd(program.working_dir);
    cwd = wd.is_absolute() ? wd : root / wd;
  }
  return std::make_unique<ProcessTransport>(
      Subprocess::spawn(program.command, cwd, {{kArtifactRootEnv, root.string()}}));
}

std::unique_ptr<Transport> make_in_process_transport(std::unique_ptr<InProcessCandidate> candidate) {
  return std::make_unique<InProcessTransport>(std::move(candidate));
}

std::vector<std::string> builtin_candidate_names() { return reference::candidate_names(); }

std::unique_ptr<InProcessCandidate> make_builtin_candidate(const std::string& name) {
  try {
    return std::make_unique<BuiltinCandidate>(reference::make_server(name));
  } catch (const Error&) {
    throw SpawnError("cannot start 'builtin:" + name + "': no such builtin candidate");
  }
}

CandidateSession::CandidateSession(std::string candidate_id, std::unique_ptr<Transport> transport,
                                   std::chrono::milliseconds call_timeout)
    : candidate_id_(std::move(candidate_id)), transport_(std::move(transport)), call_timeout_(call_timeout) {}

CandidateSession::~CandidateSession() {
  try {
    shutdown();
  } catch (...) {
    if (transport_) transport_->terminate();
  }
}

void CandidateSession::crash(const std::string& detail) {
  state_ = SessionState::crashed;
  crash_detail_ = detail;
  const std::string diag = transport_->diagnostics();
  if (!diag.empty()) crash_detail_ += " (stderr: " + diag.substr(diag.size() > 500 ? diag.size() - 500 : 0) + ")";
  transport_->terminate();
  throw CandidateCrashed("candidate " + candidate_id_ + " crashed: " + crash_detail_);
}

Json CandidateSession::call(const std::string& method, const std::string& task_id, const Json& request) {
  CallLogEntry entry;
  entry.method = method;
  entry.task_id = task_id;
  entry.request = request.dump(-1, ' ', false, Json::error_handler_t::replace) + "\n";
  const auto start = Clock::now();
  Transport::Reply reply = transport_->exchange(entry.request, call_timeout_);
  entry.duration = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start);
  entry.reply = reply.line;

  auto record = [&](const char* status) {
    entry.status = status;
    log_.push_back(entry);
  };
  if (reply.status == Transport::Status::timeout) {
    record("timeout");
    crash("no reply to " + method + " within " + std::to_string(call_timeout_.count()) + " ms (timeout)");
  }
  if (reply.status == Transport::Status::closed) {
    record("exited");
    crash("process exited during " + method);
  }
  Json parsed;
  try {
    parsed = Json::parse(reply.line);
  } catch (const nlohmann::json::exception&) {
    record("malformed");
    crash("malformed reply to " + method + ": " + reply.line.substr(0, 200));
  }
  if (!parsed.is_object() || !parsed.contains("ok") || !parsed["ok"].is_boolean()) {
    record("malformed");
    crash("reply to " + method + " lacks a boolean \"ok\": " + reply.line.substr(0, 200));
  }
  if (!parsed["ok"].get<bool>()) {
    record("error");
    std::string message = parsed.contains("error") && parsed["error"].is_string() ? parsed["error"].get<std::string>()
                                                                                  : std::string("unspecified error");
    throw CandidateCallError("candidate " + candidate_id_ + " rejected " + method + ": " + message);
  }
  record("ok");
  return parsed;
}

void CandidateSession::handshake() {
  std::lock_guard lock(mutex_);
  if (state_ != SessionState::starting) throw StateError("handshake already performed");
  Json reply = call("hello", "", Json{{"method", "hello"}, {"protocol", kProtocolVersion}});
  if (reply.contains("protocol") && reply["protocol"] != Json(kProtocolVersion)) {
    state_ = SessionState::crashed;
    crash_detail_ = "protocol version mismatch: candidate speaks " + reply["protocol"].dump() + ", host speaks " +
                    std::to_string(kProtocolVersion);
    transport_->terminate();
    throw SessionError("candidate " + candidate_id_ + ": " + crash_detail_);
  }
  hello_reply_ = std::move(reply);
  state_ = SessionState::updating;
}

void CandidateSession::update(const EpisodeRecorder& episode) {
  std::lock_guard lock(mutex_);
  if (state_ == SessionState::crashed) throw SessionError("session crashed: " + crash_detail_);
  if (state_ != SessionState::updating)
    throw StateError(std::string("update not allowed in state ") + to_string(state_));
  call("update", episode.task_id, Json{{"method", "update"}, {"episode", to_json(episode)}});
}

void CandidateSession::freeze() {
  std::lock_guard lock(mutex_);
  if (state_ == SessionState::crashed) throw SessionError("session crashed: " + crash_detail_);
  if (state_ != SessionState::updating)
    throw StateError(std::string("freeze not allowed in state ") + to_string(state_));
  call("freeze", "", Json{{"method", "freeze"}});
  state_ = SessionState::frozen;
}

Json CandidateSession::retrieve(const EpisodeRecorder& task) {
  std::lock_guard lock(mutex_);
  if (state_ == SessionState::crashed) throw SessionError("session crashed: " + crash_detail_);
  if (state_ != SessionState::frozen && state_ != SessionState::retrieving)
    throw StateError(std::string("retrieve not allowed in state ") + to_string(state_));
  Json reply = call("retrieve", task.task_id, Json{{"method", "retrieve"}, {"task", to_json(task.partial_view())}});
  if (!reply.contains("payload")) {
    log_.back().status = "malformed";
    crash("retrieve reply has no payload");
  }
  state_ = SessionState::retrieving;
  return std::move(reply["payload"]);
}

void CandidateSession::shutdown() {
  std::lock_guard lock(mutex_);
  if (state_ == SessionState::closed || state_ == SessionState::crashed) return;
  if (state_ != SessionState::starting) {
    try {
      call("shutdown", "", Json{{"method", "shutdown"}});
    } catch (const CandidateCallError&) {
      // still close below
    } catch (const CandidateCrashed&) {
      return;
    }
  }
  auto code = transport_->finish(std::min(call_timeout_, std::chrono::milliseconds{5000}));
  if (code && *code != 0) log::warn("candidate " + candidate_id_ + " exited with status " + std::to_string(*code));
  state_ = SessionState::closed;
}

SessionState CandidateSession::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

std::vector<CallLogEntry> CandidateSession::call_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::string CandidateSession::transcript() const {
  std::lock_guard lock(mutex_);
  std::string out;
  for (const auto& e : log_) out += e.request;
  return out;
}

Json CandidateSession::hello_reply() const {
  std::lock_guard lock(mutex_);
  return hello_reply_;
}

std::string CandidateSession::crash_detail() const {
  std::lock_guard lock(mutex_);
  return crash_detail_;
}

std::unique_ptr<CandidateSession> start_session(const CandidateArtifact& candidate, const SessionOptions& options) {
  if (candidate.program.command.empty()) throw SpawnError("candidate " + candidate.candidate_id + " has no command");
  std::unique_ptr<Transport> transport =
      candidate.program.is_builtin() ? make_in_process_transport(make_builtin_candidate(candidate.program.builtin_name()))
                                     : make_process_transport(candidate.program, options.artifact_root);
  auto session = std::make_unique<CandidateSession>(candidate.candidate_id, std::move(transport), options.call_timeout);
  session->handshake();
  return session;
}

}  // namespace memosearch
