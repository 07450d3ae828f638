#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "memosearch/harness.hpp"
#include "memosearch/lifecycle.hpp"
#include "memosearch/search.hpp"

// Synthetic design landscape with known ground truth. Each candidate has a
// latent quality q; a task succeeds with probability
// clamp(base_rate + q * gain, 0, 1).
namespace memosearch::sim {

struct LandscapeParams {
  double base_rate = 0.3;
  double gain = 0.5;
  double drift = 0.15;
  double bias = 0.05;  // mean shift of the mutation kernel
  double root_quality = 0.0;
  std::uint64_t seed = 0;
  // Rewards become 1{u_task < p} with one fixed draw per task.
  bool zero_noise = false;
  // Rewards depend on the payload instead of q: a retrieve task succeeds
  // with base_rate + gain when the payload names its matching stored episode.
  bool semantic = false;
  int update_tasks = 10;
  int retrieve_tasks = 20;

  void validate() const;
  friend bool operator==(const LandscapeParams&, const LandscapeParams&) = default;
};

Json to_json(const LandscapeParams& params);
LandscapeParams landscape_params_from_json(const Json& j, const std::string& prefix = "landscape");

// Stateless 64-bit mixing; the basis of every random draw in the landscape.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view s);
// Uniform in [0, 1) from a key.
double unit_from(std::uint64_t key);

class Landscape {
 public:
  explicit Landscape(LandscapeParams params);

  const LandscapeParams& params() const { return params_; }
  void register_candidate(const std::string& candidate_id, double quality);
  bool contains(const std::string& candidate_id) const;
  // Throws Error for unknown candidates.
  double quality(const std::string& candidate_id) const;
  double success_probability(const std::string& candidate_id) const;
  double probability_for_quality(double quality) const;
  // Mutation kernel: clamp(parent + drift * u + bias, 0, 1), u uniform in
  // [-1, 1] drawn from (seed, child id).
  double child_quality(double parent_quality, const std::string& child_id) const;
  std::map<std::string, double> qualities() const;

 private:
  LandscapeParams params_;
  mutable std::mutex mutex_;
  std::map<std::string, double> quality_;
};

// Synthetic update and retrieve tasks. Retrieve task j shares its keywords
// with update task j mod update_tasks, named in init.metadata["match"].
// Update tasks come back partial; collect them with a runner.
struct SimTasks {
  std::vector<EpisodeRecorder> update_tasks;
  std::vector<EpisodeRecorder> retrieve_tasks;
};
SimTasks make_tasks(const LandscapeParams& params);

// In the zero-noise variant each retrieve task gets a fixed threshold
// (rank + 0.5) / n under a seeded permutation of the tasks, so a candidate
// with success probability p completes exactly round(p * n) of n tasks
// whenever p * n is not a half-integer.
class SimRunner : public TaskRunner {
 public:
  explicit SimRunner(const Landscape& landscape);
  TaskOutcome run(const TaskContext& context, const EpisodeRecorder& task, const TruncatedPayload* payload) override;
  // Number of runs that received a payload.
  std::size_t deliveries() const { return deliveries_; }

 private:
  const Landscape& landscape_;
  std::map<std::string, double> thresholds_;  // zero-noise draws by task id
  std::atomic<std::size_t> deliveries_{0};
};

// Rounds listed in fail_rounds emit a candidate that fails the schema check;
// repairs fix it only when repair_fixes is set.
struct FailurePlan {
  std::set<int> fail_rounds;
  bool repair_fixes = false;
};

class SimMutator : public Mutator {
 public:
  SimMutator(Landscape& landscape, FailurePlan plan = {}) : landscape_(landscape), plan_(std::move(plan)) {}
  CandidateArtifact mutate(const CandidateArtifact& parent, const ReflectionFeedback& feedback,
                           const MutationContext& context) override;

 private:
  Landscape& landscape_;
  FailurePlan plan_;
};

class SimRepairer : public Repairer {
 public:
  SimRepairer(Landscape& landscape, FailurePlan plan = {}) : landscape_(landscape), plan_(std::move(plan)) {}
  CandidateArtifact repair(const CandidateArtifact& broken, const QuickExamReport& report,
                           const MutationContext& context) override;

 private:
  Landscape& landscape_;
  FailurePlan plan_;
};

// Program a simulated candidate runs: the empty memo, or the keyword memo
// on the semantic landscape.
ProgramRef sim_program(const LandscapeParams& params);
CandidateArtifact sim_root(const LandscapeParams& params);

struct RegretReport {
  double best_quality = 0.0;
  double selected_quality = 0.0;
  double mean_quality = 0.0;
  int selected_rank = 1;  // 1 = best; ties share the better rank
  int candidates = 0;
};

RegretReport regret_report(const GenerationTree& tree, NodeId selected, const Landscape& landscape);
Json to_json(const RegretReport& report);

// Highest node mean after the root evaluation and after each round.
std::vector<double> best_so_far(const GenerationTree& tree);

// Everything a simulated search needs, wired together. Members refer to
// each other, so a world is neither copied nor moved.
class SimWorld {
 public:
  SimWorld(const SearchConfig& config, const LandscapeParams& params, const FailurePlan& plan = {});
  SimWorld(const SimWorld&) = delete;
  SimWorld& operator=(const SimWorld&) = delete;

  Landscape& landscape() { return landscape_; }
  SimRunner& runner() { return runner_; }
  const EvalBatches& batches() const { return evaluator_.batches(); }
  FullEvaluator& evaluator() { return evaluator_; }
  Examiner& examiner() { return examiner_; }
  MutatorPipeline& generator() { return generator_; }
  CandidateArtifact root() const { return sim_root(landscape_.params()); }

  // Registers the latent quality of every node of a replayed tree, so a
  // resumed search sees the landscape the original run built.
  void restore(const GenerationTree& tree);

 private:
  Landscape landscape_;
  SimRunner runner_;
  HarnessEvaluator evaluator_;
  QuickExaminer examiner_;
  SummaryReflector reflector_;
  SimMutator mutator_;
  SimRepairer repairer_;
  ReflectiveGenerator generator_;
};

// Update batch run with no memory plus the retrieve tasks, as used by every
// sim evaluation for these parameters.
EvalBatches sim_batches(const LandscapeParams& params);

struct SimRunResult {
  SearchOutcome outcome;
  RegretReport regret;
  std::vector<double> curve;
  EvalBatches batches;
};

// Full sim wiring: landscape, shared update batch, harness evaluator,
// quick exams, reflective generator.
SimRunResult run_sim_search(const SearchConfig& config, const LandscapeParams& params, const FailurePlan& plan,
                            JournalSink& journal);

// Runs seeds first_seed .. first_seed+count-1; each seed sets both the
// landscape seed and the search rng_seed. Returns the aggregate report.
Json run_sim_batch(const SearchConfig& config, const LandscapeParams& params, std::uint64_t first_seed, int count);

}  // namespace memosearch::sim
