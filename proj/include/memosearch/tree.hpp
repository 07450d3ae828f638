#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "memosearch/artifact.hpp"
#include "memosearch/common.hpp"

namespace memosearch {

struct TreeNode {
  NodeId id;
  std::optional<NodeId> parent;
  CandidateArtifact candidate;
  double mean_score = 0.0;       // running mean of full-evaluation scores
  int eval_count = 0;            // n_i, >= 1 once inserted
  double first_score = 0.0;      // score of the evaluation that inserted it
  double cumulative_improvement = 0.0;  // S_i
  // Positive improvement of each evaluated child over this node's score at
  // the moment the child was generated. Never rewritten after insertion.
  std::map<NodeId, double> child_improvements;
  std::vector<NodeId> children;  // insertion order
  // This node's parent score at generation time (absent for the root).
  std::optional<double> parent_snapshot;

  int child_count() const { return static_cast<int>(children.size()); }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

enum class RoundAction { evaluate, generate, failed_generate };

struct RoundRecord {
  int round_index = 0;  // 1-based
  RoundAction action = RoundAction::evaluate;
  NodeId target;
  std::optional<NodeId> result_node;
  std::optional<double> score;
  bool consumed_full_eval = false;
  int exams = 0;  // quick exams run during a generation

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

class GenerationTree {
 public:
  // Root with its first full-evaluation score. Throws DomainError when the
  // score is outside [0, 1].
  static GenerationTree init(CandidateArtifact root_candidate, double root_score);

  const TreeNode& node(NodeId id) const;
  const TreeNode& root() const { return nodes_.front(); }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  bool contains(NodeId id) const { return id.value < nodes_.size(); }
  int total_evals() const { return total_evals_; }
  const std::vector<RoundRecord>& round_log() const { return round_log_; }
  int rounds_completed() const { return static_cast<int>(round_log_.size()); }

  // Re-evaluation: folds the reward into the node's running mean, N += 1.
  void record_evaluation(NodeId id, double reward);

  // Inserts an evaluated child. parent_snapshot is the parent's score when
  // the generation started. Returns the new node id; N += 1.
  NodeId insert_child(NodeId parent, CandidateArtifact candidate, double child_score, double parent_snapshot);

  void append_round(RoundRecord record);

  // Throws CorruptionError if any structural invariant is broken.
  void check_invariants() const;

  friend bool operator==(const GenerationTree&, const GenerationTree&) = default;

 private:
  TreeNode& mutable_node(NodeId id);

  std::vector<TreeNode> nodes_;
  int total_evals_ = 0;
  std::vector<RoundRecord> round_log_;
};

const char* to_string(RoundAction action);
RoundAction round_action_from_string(const std::string& s);

Json to_json(const RoundRecord& record);
RoundRecord round_record_from_json(const Json& j);
Json to_json(const TreeNode& node);
Json to_json(const GenerationTree& tree);

}  // namespace memosearch
