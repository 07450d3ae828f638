#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memosearch/search.hpp"

namespace memosearch {

// Files of one run directory.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path config_file() const { return root / "config.json"; }
  std::filesystem::path journal_file() const { return root / "journal.jsonl"; }
  std::filesystem::path candidates_dir() const { return root / "candidates"; }
  std::filesystem::path evidence_dir() const { return root / "evidence"; }
  std::filesystem::path lock_file() const { return root / "lock"; }

  // Creates the directory tree; existing directories are fine.
  void create() const;
};

// Exclusive advisory lock on a run directory, held for the object's life.
class RunLock {
 public:
  // Throws JournalError when another process holds the lock.
  explicit RunLock(const std::filesystem::path& lock_file);
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;
  ~RunLock();

 private:
  int fd_ = -1;
};

// Content-addressed blobs: each file is named by the SHA-256 of its bytes.
class CandidateStore {
 public:
  explicit CandidateStore(std::filesystem::path dir);
  // Returns the digest; writing the same bytes twice is a no-op.
  std::string put(std::string_view bytes);
  std::string get(const std::string& digest) const;
  bool contains(const std::string& digest) const;
  std::filesystem::path path(const std::string& digest) const { return dir_ / digest; }

 private:
  std::filesystem::path dir_;
};

// Writes program text into the store and builds a candidate whose command
// is command_template with every "{source}" replaced by the stored file's
// absolute path.
CandidateArtifact materialize_candidate(CandidateStore& store, const std::vector<std::string>& command_template,
                                        const std::string& candidate_id, const std::string& program_text);

// Program text behind a candidate, or empty when it has none in the store.
std::string candidate_source(const CandidateStore& store, const CandidateArtifact& candidate);

// Append-only JSONL file. Each append is one complete line handed to the
// kernel before returning.
class Journal {
 public:
  // Fails if the file already exists.
  static Journal create(const std::filesystem::path& path);
  // Opens an existing journal, dropping every byte past keep_bytes.
  static Journal reopen(const std::filesystem::path& path, std::uintmax_t keep_bytes, std::uint64_t lines_kept);

  Journal(Journal&& other) noexcept;
  Journal& operator=(Journal&& other) noexcept;
  Journal(const Journal&) = delete;
  Journal& operator=(const Journal&) = delete;
  ~Journal();

  // 1-based line number of the appended event. Throws JournalError on I/O
  // failure or after close().
  std::uint64_t append(const Json& event);
  void close();
  bool is_open() const { return fd_ >= 0; }
  std::uint64_t position() const { return position_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  Journal(std::filesystem::path path, int fd, std::uint64_t position);

  std::filesystem::path path_;
  int fd_ = -1;
  std::uint64_t position_ = 0;
};

// JournalSink writing search events to a Journal. Feedback documents go to
// the candidate store and evidence files under evidence_dir when given.
class JournalWriter : public JournalSink {
 public:
  JournalWriter(Journal& journal, CandidateStore* store = nullptr, std::optional<std::filesystem::path> evidence_dir = {});

  void node_inserted(const TreeNode& node, const std::optional<double>& parent_snapshot) override;
  void evaluation(NodeId node, int evaluation_index, const FullEvalResult& result) override;
  void generation(int round, const GenerationResult& result) override;
  void round_aborted(int round, int attempt, const std::string& reason) override;
  void round_completed(const RoundRecord& record, const std::string& rng_state, int evaluations_started) override;

 private:
  Journal& journal_;
  CandidateStore* store_;
  std::optional<std::filesystem::path> evidence_dir_;
};

Json header_event(const Json& run_config, const SearchConfig& search, const std::string& mode);

struct ReplayResult {
  Json header;
  SearchConfig config;
  SearchState state;
  std::uint64_t committed_lines = 0;   // lines up to the last complete round
  std::uintmax_t committed_bytes = 0;
  std::uint64_t dropped_lines = 0;     // complete lines after that point
  bool truncated_tail = false;         // last line had no newline
  std::vector<std::string> warnings;
};

// Rebuilds the search state as of the last complete round. A half-written
// final line is ignored with a warning; an unreadable middle line or an
// inconsistent event throws CorruptionError, as does a journal without an
// evaluated root.
ReplayResult replay_journal(const std::filesystem::path& path);

// File name used for evidence of one task in one evaluation.
std::filesystem::path evidence_path(const std::filesystem::path& evidence_dir, int evaluation_index,
                                    const std::string& task_id);

}  // namespace memosearch
