#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "memosearch/journal.hpp"
#include "memosearch/lifecycle.hpp"
#include "memosearch/policy.hpp"
#include "memosearch/search.hpp"

namespace mstest {

using namespace memosearch;

// Six passing checks.
QuickExamReport passing_report();
// First check named `failing` fails, later ones are skipped.
QuickExamReport failing_report(const std::string& failing);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "ms");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Each candidate id maps to a fixed score; unknown ids score fallback.
// Indices listed in fail_indices throw EvaluationError instead.
class ScriptedEvaluator : public FullEvaluator {
 public:
  std::map<std::string, double> scores;
  double fallback = 0.0;
  std::set<int> fail_indices;
  std::vector<std::pair<std::string, int>> calls;

  FullEvalResult evaluate(const CandidateArtifact& candidate, int evaluation_index) override;
};

// Child of round r is "g<r>". Rounds in fail_rounds produce no child and
// record exams_on_failure exams. Child scores come from the evaluator.
class ScriptedPipeline : public MutatorPipeline {
 public:
  std::set<int> fail_rounds;
  int exams_on_failure = 4;
  std::vector<int> rounds_seen;

  GenerationResult generate(const GenerationRequest& request) override;
};

// Evaluator whose child scores follow a list in creation order.
class SequenceEvaluator : public FullEvaluator {
 public:
  double root_score = 0.0;
  std::vector<double> child_scores;  // by order of first evaluation
  FullEvalResult evaluate(const CandidateArtifact& candidate, int evaluation_index) override;

 private:
  std::map<std::string, double> assigned_;
};

struct RecordedEvent {
  std::string type;
  Json data;
};

class RecordingJournal : public JournalSink {
 public:
  std::vector<RecordedEvent> events;
  void node_inserted(const TreeNode& node, const std::optional<double>& parent_snapshot) override;
  void evaluation(NodeId node, int evaluation_index, const FullEvalResult& result) override;
  void generation(int round, const GenerationResult& result) override;
  void round_aborted(int round, int attempt, const std::string& reason) override;
  void round_completed(const RoundRecord& record, const std::string& rng_state, int evaluations_started) override;
  int count(const std::string& type) const;
};

CandidateArtifact stub_candidate(const std::string& id);

// Random tree with up to max_nodes nodes and random statistics, built
// through the public tree operations.
GenerationTree random_tree(std::mt19937_64& rng, int max_nodes);

// Scripted T=3 run rendered in the committed golden trace format.
std::string golden_trace_text();
SearchConfig golden_config();
SearchOutcome golden_run(int steps = 3);

// Finished episode / partial task helpers.
EpisodeRecorder finished_episode(const std::string& id, const std::string& text, double reward);
EpisodeRecorder partial_task(const std::string& id, const std::string& text);

std::string read_file(const std::filesystem::path& path);

// Fuzzed payload: up to 12 items mixing multibyte text, long text and images.
RetrievedMemoryPayload random_payload(std::mt19937_64& rng);
std::vector<ImageRef> all_images(const RetrievedMemoryPayload& p);

// Frozen oracle values under tests/golden.
Json policy_oracle();

// Independent action enumerator: recomputes child counts and S from the
// node list and picks the best action by an explicit ordering key.
policy::ActionScore brute_force_best(const GenerationTree& tree, const SearchConfig& c);
SearchConfig random_config(std::mt19937_64& rng);

}  // namespace mstest
