#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "memosearch/config.hpp"
#include "memosearch/llm.hpp"
#include "memosearch/simlab.hpp"

// Operator commands behind the C API. Every command returns the text it
// would print and throws typed errors; the C API maps them to exit codes.
namespace memosearch::run {

// The root candidate failed its quick exam; carries the report.
class ExamFailed : public Error {
 public:
  explicit ExamFailed(QuickExamReport report)
      : Error("quick exam failed: " + report.summary()), report_(std::move(report)) {}
  const QuickExamReport& report() const { return report_; }

 private:
  QuickExamReport report_;
};

struct RootSpec {
  ProgramRef program;                  // used when source is empty
  std::filesystem::path source;        // program text, launched via candidate_command
};

struct CommandSpec {
  std::vector<std::string> command;
  std::filesystem::path working_dir;
  std::chrono::milliseconds timeout{600'000};
};

// A run config file: one JSON document; relative paths resolve against the
// file's directory.
struct RunConfig {
  std::string mode = "sim";  // sim | external | llm
  std::filesystem::path run_dir;
  SearchConfig search;
  sim::LandscapeParams landscape;
  sim::FailurePlan failure_plan;
  std::filesystem::path batches;  // external and llm modes
  RootSpec root;
  CommandSpec runner;             // task runner, external and llm modes
  CommandSpec meta;               // external mutator / repairer
  std::optional<llm::ChatEndpointConfig> endpoint;
  std::vector<std::string> candidate_command{"python3", "{source}"};
  std::filesystem::path artifact_root;

  // Mode-dependent required fields. Throws ConfigError.
  void validate() const;
};

RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
// Canonical document with absolute paths; what a run directory stores.
Json to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

struct SearchOptions {
  std::optional<std::string> mode;  // overrides the file
  std::optional<std::filesystem::path> run_dir;
};

// Creates the run directory, exam-checks the root, runs the search and
// returns the selection summary.
std::string cmd_search(const std::filesystem::path& config_path, const SearchOptions& options = {});

// Continues an interrupted run. With config_path, the file's search
// settings must match the journal header or the resume is refused.
std::string cmd_resume(const std::filesystem::path& run_dir,
                       const std::optional<std::filesystem::path>& config_path = {});

struct EvalOptions {
  std::vector<std::string> candidate;  // argv, or a single builtin:<name>
  std::filesystem::path batches;
  std::optional<std::filesystem::path> config;  // search and landscape settings
  std::vector<std::string> runner;     // external task runner; empty means the sim landscape
  bool skip_exam = false;
  bool json = false;
};

// One-off full evaluation. Throws ExamFailed unless skip_exam.
std::string cmd_eval(const EvalOptions& options);

enum class TreeFormat { text, dot, json };
TreeFormat tree_format_from_string(const std::string& s);

std::string render_tree(const GenerationTree& tree, const SearchConfig& config, TreeFormat format);
std::string cmd_tree(const std::filesystem::path& run_dir, TreeFormat format);

// Runs count sim seeds; writes the aggregate JSON to out when given.
std::string cmd_sim_batch(const std::optional<std::filesystem::path>& config_path, std::uint64_t first_seed,
                          int count, const std::optional<std::filesystem::path>& out);

// Writes the sim evaluation batches (collected update episodes plus
// retrieve tasks) as a batches file.
std::string cmd_sim_write_batches(const std::optional<std::filesystem::path>& config_path,
                                  const std::filesystem::path& out);

}  // namespace memosearch::run
