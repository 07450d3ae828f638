#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "memosearch/common.hpp"

// Reference memo programs and the protocol server that fronts them. They back
// the "builtin:" candidates and the memo_ref_candidate executable.
namespace memosearch::reference {

class MemoProgram {
 public:
  virtual ~MemoProgram() = default;
  virtual void update(const Json& episode) = 0;
  virtual Json retrieve(const Json& task) = 0;
};

// Always returns {"items": [], "metadata": {}}.
class EmptyMemo : public MemoProgram {
 public:
  void update(const Json&) override {}
  Json retrieve(const Json&) override;
};

// Stores one line per finished episode keyed by its task tokens; retrieves
// the (at most two) stored episodes with the largest token overlap, most
// recent first on ties, each with at most one image.
class KeywordMemo : public MemoProgram {
 public:
  void update(const Json& episode) override;
  Json retrieve(const Json& task) override;

 private:
  struct Entry {
    std::string task_id;
    std::vector<std::string> tokens;  // sorted, unique
    std::string summary;
    Json image;  // null when the episode had none
  };
  std::vector<Entry> entries_;
};

// Lowercased alphanumeric runs.
std::vector<std::string> tokenize(std::string_view text);

enum class Misbehavior {
  none,
  bad_schema,        // retrieve returns items as an object
  missing_retrieve,  // does not declare or implement retrieve
  hang_on_update,
  crash_on_update,
  too_many_images,   // retrieve emits three images
  protocol_v2,       // answers hello with protocol 2
  non_json,          // answers update with a non-JSON line
};

struct ServerAction {
  enum class Kind { reply, hang, exit };
  Kind kind = Kind::reply;
  std::string line;
  int exit_code = 0;
};

class ProtocolServer {
 public:
  ProtocolServer(std::unique_ptr<MemoProgram> program, Misbehavior misbehavior = Misbehavior::none);
  ServerAction handle(const std::string& line);
  bool frozen() const { return frozen_; }

 private:
  std::unique_ptr<MemoProgram> program_;
  Misbehavior misbehavior_;
  bool frozen_ = false;
};

// Maps a candidate name ("empty", "keyword", "bad-schema", ...) onto a server.
// Throws Error for unknown names.
std::unique_ptr<ProtocolServer> make_server(const std::string& name);
std::vector<std::string> candidate_names();

}  // namespace memosearch::reference
