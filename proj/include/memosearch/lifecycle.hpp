#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "memosearch/artifact.hpp"
#include "memosearch/config.hpp"
#include "memosearch/episodes.hpp"
#include "memosearch/harness.hpp"
#include "memosearch/host.hpp"
#include "memosearch/tree.hpp"

namespace memosearch {

// Names of the quick-exam checks, in the order they run.
inline constexpr const char* kExamHandshake = "handshake";
inline constexpr const char* kExamInterface = "interface";
inline constexpr const char* kExamUpdate = "update";
inline constexpr const char* kExamRetrieve = "retrieve";
inline constexpr const char* kExamSchema = "schema";
inline constexpr const char* kExamBudget = "budget";

enum class PayloadLabel { useful, potentially_useful, irrelevant, empty_bad_format };
enum class Priority { high, medium, low };

struct PayloadAssessment {
  PayloadLabel label = PayloadLabel::irrelevant;
  std::string note;
  friend bool operator==(const PayloadAssessment&, const PayloadAssessment&) = default;
};

struct SuggestedChange {
  Priority priority = Priority::medium;
  std::string what;
  std::string why;
  friend bool operator==(const SuggestedChange&, const SuggestedChange&) = default;
};

struct ReflectionFeedback {
  std::string diagnosis;
  std::vector<PayloadAssessment> assessments;
  std::vector<SuggestedChange> suggested_changes;
  // Task ids of the trajectories the reflector saw.
  std::vector<std::string> sampled_tasks;
  friend bool operator==(const ReflectionFeedback&, const ReflectionFeedback&) = default;
};

// One sampled trajectory, already cut to the meta limits.
struct TrajectorySample {
  std::string task_id;
  double reward = 0.0;
  std::string task_text;
  std::string observation_summary;
  std::vector<ImageRef> images;
  std::string memory_text;  // empty when nothing was retrieved
  std::vector<ImageRef> memory_images;
};

struct EvidenceBundle {
  CandidateArtifact parent;
  std::string parent_source;  // program text, empty when unknown
  double score = 0.0;
  int eval_count = 0;
  std::vector<TrajectorySample> successes;
  std::vector<TrajectorySample> failures;
};

// Child id and round for artifacts produced during one generation.
struct MutationContext {
  int round = 0;
  std::string candidate_id;
  double parent_score = 0.0;  // latest mean of the parent node
};

// Single-call meta-agent contracts. Transport failures throw (AdapterError
// or LifecycleError); a bad program is returned, not thrown.
class Reflector {
 public:
  virtual ~Reflector() = default;
  virtual ReflectionFeedback reflect(const EvidenceBundle& evidence) = 0;
};

class Mutator {
 public:
  virtual ~Mutator() = default;
  virtual CandidateArtifact mutate(const CandidateArtifact& parent, const ReflectionFeedback& feedback,
                                   const MutationContext& context) = 0;
};

class Repairer {
 public:
  virtual ~Repairer() = default;
  virtual CandidateArtifact repair(const CandidateArtifact& broken, const QuickExamReport& report,
                                   const MutationContext& context) = 0;
};

struct ExamInputs {
  std::vector<EpisodeRecorder> sample_episodes;  // finished
  std::vector<EpisodeRecorder> sample_tasks;     // partial
  SearchConfig config;
  SessionOptions session;
};

// First quick_test_tasks retrieve tasks and as many update episodes. Throws
// ConfigError when the batches hold fewer retrieve tasks than that.
ExamInputs make_exam_inputs(const EvalBatches& batches, const SearchConfig& config, const SessionOptions& session);

// Runs the six checks in order and stops at the first failure; later checks
// are reported as skipped. Never throws for candidate misbehavior.
QuickExamReport quick_exam(const CandidateArtifact& candidate, const ExamInputs& inputs);

class Examiner {
 public:
  virtual ~Examiner() = default;
  virtual QuickExamReport examine(const CandidateArtifact& candidate) = 0;
};

class QuickExaminer : public Examiner {
 public:
  explicit QuickExaminer(ExamInputs inputs) : inputs_(std::move(inputs)) {}
  QuickExamReport examine(const CandidateArtifact& candidate) override { return quick_exam(candidate, inputs_); }

 private:
  ExamInputs inputs_;
};

struct RepairOutcome {
  std::optional<CandidateArtifact> accepted;  // carries its passing report
  CandidateArtifact last;                     // final candidate examined
  QuickExamReport final_report;
  std::vector<CandidateArtifact> attempts;    // every candidate examined
  int exams = 0;
  int repairs = 0;
};

// Candidate id of repair attempt k (1-based) for a generation's child id.
std::string repair_candidate_id(const std::string& child_id, int attempt);

// Mutates once, then repairs at most repair_budget times, examining after
// each step. Meta-agent transport failures become LifecycleError.
RepairOutcome mutate_and_repair(const CandidateArtifact& parent, const ReflectionFeedback& feedback, Mutator& mutator,
                                Repairer& repairer, int repair_budget, Examiner& examiner,
                                const MutationContext& context);

// Successful trajectories have reward >= this threshold.
inline constexpr double kSuccessThreshold = 0.5;

// Samples successes and failures from the parent's completed outcomes with
// the given RNG and cuts them to the meta limits of the config.
EvidenceBundle sample_evidence(const CandidateArtifact& parent, int eval_count, const FullEvalResult& result,
                               const SearchConfig& config, std::mt19937_64& rng, std::string parent_source = {});

// sample_evidence followed by the reflector. Throws LifecycleError when the
// parent has no completed outcome or the reflector fails.
ReflectionFeedback build_feedback(const CandidateArtifact& parent, int eval_count, const FullEvalResult& result,
                                  const SearchConfig& config, std::mt19937_64& rng, Reflector& reflector,
                                  std::string parent_source = {});

// What one Generate round asks for and gets back.
struct GenerationRequest {
  const GenerationTree& tree;
  NodeId parent;
  const FullEvalResult* parent_result;  // latest full evaluation of the parent
  int round = 0;
  std::mt19937_64& rng;
};

struct GenerationResult {
  std::optional<CandidateArtifact> child;  // passing candidate, absent on failure
  std::vector<CandidateArtifact> attempts;
  QuickExamReport final_report;
  int exams = 0;
  std::optional<ReflectionFeedback> feedback;
};

class MutatorPipeline {
 public:
  virtual ~MutatorPipeline() = default;
  virtual GenerationResult generate(const GenerationRequest& request) = 0;
};

// Resolves a candidate's program text for the reflector; may return empty.
using SourceLookup = std::function<std::string(const CandidateArtifact&)>;

// Reflect, mutate, then examine and repair.
class ReflectiveGenerator : public MutatorPipeline {
 public:
  ReflectiveGenerator(Reflector& reflector, Mutator& mutator, Repairer& repairer, Examiner& examiner,
                      SearchConfig config, SourceLookup source_lookup = {});
  GenerationResult generate(const GenerationRequest& request) override;

 private:
  Reflector& reflector_;
  Mutator& mutator_;
  Repairer& repairer_;
  Examiner& examiner_;
  SearchConfig config_;
  SourceLookup source_lookup_;
};

// Deterministic reflector that restates the evidence it was given; used
// when no meta agent is configured.
class SummaryReflector : public Reflector {
 public:
  ReflectionFeedback reflect(const EvidenceBundle& evidence) override;
};

// Child id of the candidate created in a generation round.
std::string child_candidate_id(int round);

const char* to_string(PayloadLabel label);
PayloadLabel payload_label_from_string(const std::string& s);  // SchemaError on unknown labels
const char* to_string(Priority priority);
Priority priority_from_string(const std::string& s);

Json to_json(const ReflectionFeedback& feedback);
ReflectionFeedback feedback_from_json(const Json& j);
std::string feedback_digest(const ReflectionFeedback& feedback);
Json to_json(const TrajectorySample& sample);
Json to_json(const EvidenceBundle& bundle);

}  // namespace memosearch
