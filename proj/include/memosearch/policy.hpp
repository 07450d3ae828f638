#pragma once

#include <set>
#include <vector>

#include "memosearch/config.hpp"
#include "memosearch/tree.hpp"

namespace memosearch::policy {

enum class ActionKind { evaluate, generate };

struct ActionScore {
  ActionKind kind = ActionKind::evaluate;
  NodeId node;
  double score = 0.0;

  friend bool operator==(const ActionScore&, const ActionScore&) = default;
};

// mean + c_e * sqrt(ln N / n). Natural log throughout.
double ucb_eval(double mean, int eval_count, int total_evals, double eval_confidence);

// mean - c * sqrt(ln N / n).
double lcb_eval(double mean, int eval_count, int total_evals, double confidence);

// max(0, child_mean - parent_snapshot).
double positive_improvement(double child_mean, double parent_snapshot);

// (beta * rho * max(0, mean - root_mean) + S) / (beta + K).
double local_potential(double mean, double root_mean, double cumulative_improvement, int child_count,
                       double prior_strength, double prior_pseudocount);

// mean + potential + c_g * sqrt(ln N / (beta + K)). Not clamped: a priority.
double ucb_gen(double mean, double potential, int child_count, int total_evals, double gen_confidence,
               double prior_pseudocount);

// The root plus every non-root node whose parent has at least B children.
std::set<NodeId> eligible_set(const GenerationTree& tree, int min_width);

// One Evaluate per node, then one Generate per eligible node, each group in
// ascending node id.
std::vector<ActionScore> enumerate_actions(const GenerationTree& tree, const SearchConfig& config);

// Highest score; ties prefer Evaluate, then the lower node id. Exact double
// comparison.
ActionScore select_action(const std::vector<ActionScore>& actions);

// Running-mean update; throws DomainError unless reward is in [0, 1].
void update_node_score(TreeNode& node, double reward);

// argmax of the lower confidence bound, ties to the lower node id.
NodeId final_selection(const GenerationTree& tree, double confidence);

const char* to_string(ActionKind kind);

}  // namespace memosearch::policy
