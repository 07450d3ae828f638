#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "memosearch/config.hpp"
#include "memosearch/episodes.hpp"
#include "memosearch/host.hpp"

namespace memosearch {

// Raised by a TaskRunner when the environment, not the agent, failed.
class InfrastructureError : public Error {
 public:
  using Error::Error;
};

// The candidate failed while its memory was being built.
class CandidateEvaluationError : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

struct EvalBatches {
  std::vector<EpisodeRecorder> update_episodes;  // finished, shared by every candidate
  std::vector<EpisodeRecorder> retrieve_tasks;   // partial recorders

  // Disjoint task ids, finished update episodes, partial retrieve tasks.
  void validate() const;
};

enum class OutcomeStatus { completed, infrastructure_invalid };

struct TaskOutcome {
  std::string task_id;
  double reward = 0.0;
  OutcomeStatus status = OutcomeStatus::completed;
  EpisodeRecorder evidence;  // finished recorder
};

struct FullEvalResult {
  std::string candidate_id;
  double score = 0.0;
  std::vector<TaskOutcome> outcomes;  // retrieve-task order
  std::map<std::string, TruncatedPayload> payloads;
  std::vector<std::string> warnings;

  int completed_count() const;
};

// Who is being evaluated, and which evaluation this is. Runners with
// randomness derive their streams from these fields.
struct TaskContext {
  std::string candidate_id;  // empty during update-batch collection
  int evaluation_index = 0;
  int attempt = 0;
};

class TaskRunner {
 public:
  virtual ~TaskRunner() = default;
  // payload is null when no memory is injected. Must be safe to call
  // concurrently. Throws InfrastructureError (or returns an
  // infrastructure_invalid outcome) when the environment failed.
  virtual TaskOutcome run(const TaskContext& context, const EpisodeRecorder& task, const TruncatedPayload* payload) = 0;
};

// Mean reward over completed outcomes; EvaluationVoid when none completed.
double score_of(const std::vector<TaskOutcome>& outcomes);

// Update-then-retrieve protocol on a freshly started session.
FullEvalResult full_eval(CandidateSession& session, const EvalBatches& batches, TaskRunner& runner,
                         const SearchConfig& config, int evaluation_index = 0);

// Runs each task once with no memory and caches the finished recorders by
// task id, so every candidate sees identical update episodes.
class UpdateBatchCollector {
 public:
  std::vector<EpisodeRecorder> collect(TaskRunner& runner, const std::vector<EpisodeRecorder>& tasks);
  std::size_t runs() const { return runs_; }

 private:
  std::mutex mutex_;
  std::map<std::string, EpisodeRecorder> cache_;
  std::size_t runs_ = 0;
};

// Scores one candidate artifact with a full evaluation.
class FullEvaluator {
 public:
  virtual ~FullEvaluator() = default;
  virtual FullEvalResult evaluate(const CandidateArtifact& candidate, int evaluation_index) = 0;
};

// FullEvaluator that starts a fresh session per evaluation.
class HarnessEvaluator : public FullEvaluator {
 public:
  HarnessEvaluator(EvalBatches batches, TaskRunner& runner, SearchConfig config, SessionOptions session_options);
  FullEvalResult evaluate(const CandidateArtifact& candidate, int evaluation_index) override;
  const EvalBatches& batches() const { return batches_; }

 private:
  EvalBatches batches_;
  TaskRunner& runner_;
  SearchConfig config_;
  SessionOptions session_options_;
};

// Shells out to a user command per task: the task JSON arrives on stdin, an
// outcome JSON is expected on stdout.
class ExternalTaskRunner : public TaskRunner {
 public:
  ExternalTaskRunner(std::vector<std::string> command, std::filesystem::path working_dir,
                     std::chrono::milliseconds timeout);
  TaskOutcome run(const TaskContext& context, const EpisodeRecorder& task, const TruncatedPayload* payload) override;

 private:
  std::vector<std::string> command_;
  std::filesystem::path working_dir_;
  std::chrono::milliseconds timeout_;
};

const char* to_string(OutcomeStatus status);
Json to_json(const TaskOutcome& outcome, bool with_evidence = true);
TaskOutcome task_outcome_from_json(const Json& j);
Json to_json(const FullEvalResult& result, bool with_evidence = true);
FullEvalResult full_eval_result_from_json(const Json& j);
Json to_json(const EvalBatches& batches);
EvalBatches eval_batches_from_json(const Json& j);

}  // namespace memosearch
