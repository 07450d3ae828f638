#include "memosearch/journal.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <utility>

#include "memosearch/digest.hpp"
#include "memosearch/log.hpp"

namespace memosearch {

namespace fs = std::filesystem;

namespace {

constexpr int kJournalFormat = 1;

std::string errno_text() { return std::strerror(errno); }

void write_file(const fs::path& path, std::string_view bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw JournalError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_');
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

}  // namespace

void RunLayout::create() const {
  fs::create_directories(root);
  fs::create_directories(candidates_dir());
  fs::create_directories(evidence_dir());
}

RunLock::RunLock(const fs::path& lock_file) {
  fd_ = ::open(lock_file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw JournalError("cannot open lock file " + lock_file.string() + ": " + errno_text());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw JournalError("run directory " + lock_file.parent_path().string() + " is in use by another process");
  }
}

RunLock::~RunLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

CandidateStore::CandidateStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::string CandidateStore::put(std::string_view bytes) {
  const std::string digest = sha256_hex(bytes);
  if (!fs::exists(path(digest))) write_file(path(digest), bytes);
  return digest;
}

std::string CandidateStore::get(const std::string& digest) const {
  std::ifstream in(path(digest), std::ios::binary);
  if (!in) throw JournalError("candidate store has no blob " + digest);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string bytes = ss.str();
  if (sha256_hex(bytes) != digest) throw CorruptionError("blob " + digest + " does not match its digest");
  return bytes;
}

bool CandidateStore::contains(const std::string& digest) const { return fs::exists(path(digest)); }

CandidateArtifact materialize_candidate(CandidateStore& store, const std::vector<std::string>& command_template,
                                        const std::string& candidate_id, const std::string& program_text) {
  if (command_template.empty()) throw ConfigError("candidate_command", "must not be empty");
  const std::string digest = store.put(program_text);
  const std::string source = fs::absolute(store.path(digest)).string();
  CandidateArtifact c;
  c.candidate_id = candidate_id;
  c.source_digest = digest;
  for (std::string arg : command_template) {
    for (auto pos = arg.find("{source}"); pos != std::string::npos; pos = arg.find("{source}", pos + source.size()))
      arg.replace(pos, 8, source);
    c.program.command.push_back(std::move(arg));
  }
  return c;
}

std::string candidate_source(const CandidateStore& store, const CandidateArtifact& candidate) {
  if (!candidate.source_digest || !store.contains(*candidate.source_digest)) return {};
  return store.get(*candidate.source_digest);
}

Journal::Journal(fs::path path, int fd, std::uint64_t position) : path_(std::move(path)), fd_(fd), position_(position) {}

Journal::Journal(Journal&& other) noexcept
    : path_(std::move(other.path_)), fd_(std::exchange(other.fd_, -1)), position_(other.position_) {}

Journal& Journal::operator=(Journal&& other) noexcept {
  if (this != &other) {
    close();
    path_ = std::move(other.path_);
    fd_ = std::exchange(other.fd_, -1);
    position_ = other.position_;
  }
  return *this;
}

Journal::~Journal() { close(); }

Journal Journal::create(const fs::path& path) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw JournalError("cannot create journal " + path.string() + ": " + errno_text());
  return Journal(path, fd, 0);
}

Journal Journal::reopen(const fs::path& path, std::uintmax_t keep_bytes, std::uint64_t lines_kept) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (fd < 0) throw JournalError("cannot open journal " + path.string() + ": " + errno_text());
  if (::ftruncate(fd, static_cast<off_t>(keep_bytes)) != 0) {
    const std::string err = errno_text();
    ::close(fd);
    throw JournalError("cannot truncate journal " + path.string() + ": " + err);
  }
  return Journal(path, fd, lines_kept);
}

std::uint64_t Journal::append(const Json& event) {
  if (fd_ < 0) throw JournalError("journal " + path_.string() + " is closed");
  const std::string line = event.dump(-1, ' ', false, Json::error_handler_t::replace) + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw JournalError("journal write failed: " + errno_text());
    }
    written += static_cast<std::size_t>(n);
  }
  return ++position_;
}

void Journal::close() {
  if (fd_ >= 0) {
    ::fsync(fd_);
    ::close(fd_);
    fd_ = -1;
  }
}

JournalWriter::JournalWriter(Journal& journal, CandidateStore* store, std::optional<fs::path> evidence_dir)
    : journal_(journal), store_(store), evidence_dir_(std::move(evidence_dir)) {}

void JournalWriter::node_inserted(const TreeNode& node, const std::optional<double>& parent_snapshot) {
  journal_.append(Json{{"type", "node"},
                       {"node_id", node.id.value},
                       {"parent", node.parent ? Json(node.parent->value) : Json(nullptr)},
                       {"candidate", to_json(node.candidate)},
                       {"score", node.first_score},
                       {"parent_snapshot", parent_snapshot ? Json(*parent_snapshot) : Json(nullptr)}});
}

void JournalWriter::evaluation(NodeId node, int evaluation_index, const FullEvalResult& result) {
  if (evidence_dir_) {
    for (const auto& outcome : result.outcomes) {
      const fs::path file = evidence_path(*evidence_dir_, evaluation_index, outcome.task_id);
      fs::create_directories(file.parent_path());
      Json doc = to_json(outcome);
      if (auto it = result.payloads.find(outcome.task_id); it != result.payloads.end())
        doc["truncation"] = to_json(it->second.report);
      write_file(file, doc.dump(2));
    }
  }
  journal_.append(Json{{"type", "evaluation"},
                       {"node_id", node.value},
                       {"evaluation_index", evaluation_index},
                       {"result", to_json(result)}});
}

void JournalWriter::generation(int round, const GenerationResult& result) {
  Json attempts = Json::array();
  for (const auto& a : result.attempts) attempts.push_back(to_json(a));
  Json event{{"type", "generation"},
             {"round", round},
             {"exams", result.exams},
             {"accepted", result.child ? Json(result.child->candidate_id) : Json(nullptr)},
             {"attempts", attempts}};
  if (result.feedback) {
    const Json doc = to_json(*result.feedback);
    event["feedback_digest"] = store_ ? store_->put(doc.dump()) : feedback_digest(*result.feedback);
    event["feedback"] = doc;
  }
  journal_.append(event);
}

void JournalWriter::round_aborted(int round, int attempt, const std::string& reason) {
  journal_.append(Json{{"type", "aborted"}, {"round", round}, {"attempt", attempt}, {"reason", reason}});
}

void JournalWriter::round_completed(const RoundRecord& record, const std::string& rng_state, int evaluations_started) {
  journal_.append(Json{{"type", "round"},
                       {"record", to_json(record)},
                       {"rng", rng_state},
                       {"evaluations_started", evaluations_started}});
}

Json header_event(const Json& run_config, const SearchConfig& search, const std::string& mode) {
  return Json{{"type", "header"},
              {"format", kJournalFormat},
              {"mode", mode},
              {"search", to_json(search)},
              {"config", run_config}};
}

fs::path evidence_path(const fs::path& evidence_dir, int evaluation_index, const std::string& task_id) {
  return evidence_dir / ("e" + std::to_string(evaluation_index)) / (safe_name(task_id) + ".json");
}

ReplayResult replay_journal(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptionError("cannot read journal " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  if (data.empty()) throw CorruptionError("journal " + path.string() + " is empty: no root");

  ReplayResult out;
  std::optional<SearchState> working;
  std::optional<SearchState> committed;
  bool have_header = false;
  std::uint64_t line_no = 0;
  std::size_t offset = 0;

  auto corrupt = [&](const std::string& what) -> CorruptionError {
    return CorruptionError("journal " + path.string() + " line " + std::to_string(line_no) + ": " + what);
  };

  while (offset < data.size()) {
    const std::size_t nl = data.find('\n', offset);
    if (nl == std::string::npos) {
      out.truncated_tail = true;
      out.warnings.push_back("ignoring incomplete final line " + std::to_string(line_no + 1));
      break;
    }
    ++line_no;
    const std::string_view line(data.data() + offset, nl - offset);
    offset = nl + 1;

    Json ev;
    try {
      ev = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw corrupt(std::string("invalid JSON: ") + e.what());
    }
    try {
      const std::string type = ev.at("type").get<std::string>();
      if (!have_header) {
        if (type != "header") throw corrupt("first event must be the header");
        if (ev.value("format", 0) != kJournalFormat) throw corrupt("unsupported journal format");
        out.header = ev;
        out.config = search_config_from_json(ev.at("search"));
        have_header = true;
        out.committed_lines = line_no;
        out.committed_bytes = offset;
        continue;
      }
      if (type == "header") throw corrupt("duplicate header");

      if (type == "node") {
        const CandidateArtifact candidate = candidate_from_json(ev.at("candidate"));
        const double score = ev.at("score").get<double>();
        const auto id = ev.at("node_id").get<std::uint32_t>();
        if (ev.at("parent").is_null()) {
          if (working) throw corrupt("second root node");
          if (id != 0) throw corrupt("root must be node 0");
          working = SearchState{GenerationTree::init(candidate, score), std::mt19937_64(out.config.rng_seed), 0, {}};
        } else {
          if (!working) throw corrupt("child before root");
          const NodeId parent{ev.at("parent").get<std::uint32_t>()};
          if (!working->tree.contains(parent)) throw corrupt("child of unknown parent " + to_string(parent));
          const double snapshot = ev.at("parent_snapshot").get<double>();
          if (snapshot != working->tree.node(parent).mean_score)
            throw corrupt("parent snapshot does not match the parent's score");
          const NodeId inserted = working->tree.insert_child(parent, candidate, score, snapshot);
          if (inserted.value != id) throw corrupt("node id " + std::to_string(id) + " out of sequence");
        }
      } else if (type == "evaluation") {
        if (!working) throw corrupt("evaluation before root");
        const NodeId node{ev.at("node_id").get<std::uint32_t>()};
        if (!working->tree.contains(node)) throw corrupt("evaluation of unknown node " + to_string(node));
        const int index = ev.at("evaluation_index").get<int>();
        working->latest[node] = full_eval_result_from_json(ev.at("result"));
        if (!committed && node.is_root() && working->tree.rounds_completed() == 0) {
          working->evaluations_started = index + 1;
          committed = working;
          out.committed_lines = line_no;
          out.committed_bytes = offset;
        }
      } else if (type == "round") {
        if (!committed) throw corrupt("round before the root evaluation");
        const RoundRecord record = round_record_from_json(ev.at("record"));
        GenerationTree& tree = working->tree;
        if (record.round_index != tree.rounds_completed() + 1) throw corrupt("round index out of sequence");
        if (!tree.contains(record.target)) throw corrupt("round targets unknown node " + to_string(record.target));
        if (record.action == RoundAction::evaluate) {
          if (!record.score) throw corrupt("evaluate round without a score");
          tree.record_evaluation(record.target, *record.score);
        } else if (record.action == RoundAction::generate) {
          if (!record.result_node || record.result_node->value + 1 != tree.size())
            throw corrupt("generate round does not name the newest node");
          if (tree.node(*record.result_node).parent != record.target) throw corrupt("generated node has another parent");
        } else if (tree.size() != committed->tree.size()) {
          throw corrupt("failed generation inserted a node");
        }
        if (record.action != RoundAction::generate && tree.size() != committed->tree.size())
          throw corrupt("node inserted outside a generate round");
        tree.append_round(record);
        working->rng = deserialize_rng(ev.at("rng").get<std::string>());
        working->evaluations_started = ev.at("evaluations_started").get<int>();
        committed = working;
        out.committed_lines = line_no;
        out.committed_bytes = offset;
      } else if (type == "generation" || type == "aborted") {
        // Audit only.
      } else {
        throw corrupt("unknown event type '" + type + "'");
      }
    } catch (const CorruptionError&) {
      throw;
    } catch (const Error& e) {
      throw corrupt(e.what());
    } catch (const nlohmann::json::exception& e) {
      throw corrupt(std::string("malformed event: ") + e.what());
    }
  }

  if (!have_header) throw CorruptionError("journal " + path.string() + " has no header");
  if (!committed) throw CorruptionError("journal " + path.string() + " has no evaluated root");
  out.dropped_lines = line_no - out.committed_lines;
  if (out.dropped_lines > 0)
    out.warnings.push_back("dropping " + std::to_string(out.dropped_lines) + " events of an incomplete round");
  committed->tree.check_invariants();
  out.state = std::move(*committed);
  for (const auto& w : out.warnings) log::warn(w);
  return out;
}

}  // namespace memosearch
