#include "memosearch/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace memosearch::policy {

namespace {

void require_counts(int eval_count, int total_evals) {
  if (eval_count < 1) throw DomainError("eval count must be >= 1, got " + std::to_string(eval_count));
  if (total_evals < 1) throw DomainError("total evals must be >= 1, got " + std::to_string(total_evals));
}

void require_pseudocount(double beta) {
  if (!(beta > 0.0)) throw DomainError("prior pseudocount must be > 0");
}

double confidence_radius(double confidence, int total_evals, double denominator) {
  return confidence * std::sqrt(std::log(static_cast<double>(total_evals)) / denominator);
}

}  // namespace

double ucb_eval(double mean, int eval_count, int total_evals, double eval_confidence) {
  require_counts(eval_count, total_evals);
  return mean + confidence_radius(eval_confidence, total_evals, static_cast<double>(eval_count));
}

double lcb_eval(double mean, int eval_count, int total_evals, double confidence) {
  require_counts(eval_count, total_evals);
  return mean - confidence_radius(confidence, total_evals, static_cast<double>(eval_count));
}

double positive_improvement(double child_mean, double parent_snapshot) {
  return std::max(0.0, child_mean - parent_snapshot);
}

double local_potential(double mean, double root_mean, double cumulative_improvement, int child_count,
                       double prior_strength, double prior_pseudocount) {
  require_pseudocount(prior_pseudocount);
  if (child_count < 0) throw DomainError("child count must be >= 0");
  const double prior = prior_strength * std::max(0.0, mean - root_mean);
  return (prior_pseudocount * prior + cumulative_improvement) / (prior_pseudocount + child_count);
}

double ucb_gen(double mean, double potential, int child_count, int total_evals, double gen_confidence,
               double prior_pseudocount) {
  require_pseudocount(prior_pseudocount);
  if (total_evals < 1) throw DomainError("total evals must be >= 1, got " + std::to_string(total_evals));
  if (child_count < 0) throw DomainError("child count must be >= 0");
  return mean + potential + confidence_radius(gen_confidence, total_evals, prior_pseudocount + child_count);
}

std::set<NodeId> eligible_set(const GenerationTree& tree, int min_width) {
  std::set<NodeId> eligible{NodeId::root()};
  for (const auto& node : tree.nodes()) {
    if (!node.parent) continue;
    if (tree.node(*node.parent).child_count() >= min_width) eligible.insert(node.id);
  }
  return eligible;
}

std::vector<ActionScore> enumerate_actions(const GenerationTree& tree, const SearchConfig& config) {
  std::vector<ActionScore> actions;
  const int total = tree.total_evals();
  for (const auto& node : tree.nodes()) {
    actions.push_back({ActionKind::evaluate, node.id,
                       ucb_eval(node.mean_score, node.eval_count, total, config.eval_confidence)});
  }
  // The root-relative prior reads the root's current running mean.
  const double root_mean = tree.root().mean_score;
  for (NodeId id : eligible_set(tree, config.min_width)) {
    const auto& node = tree.node(id);
    const double potential = local_potential(node.mean_score, root_mean, node.cumulative_improvement,
                                             node.child_count(), config.prior_strength, config.prior_pseudocount);
    actions.push_back({ActionKind::generate, id,
                       ucb_gen(node.mean_score, potential, node.child_count(), total, config.gen_confidence,
                               config.prior_pseudocount)});
  }
  return actions;
}

ActionScore select_action(const std::vector<ActionScore>& actions) {
  if (actions.empty()) throw DomainError("cannot select from an empty action list");
  auto better = [](const ActionScore& a, const ActionScore& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.kind != b.kind) return a.kind == ActionKind::evaluate;
    return a.node < b.node;
  };
  ActionScore best = actions.front();
  for (const auto& a : actions) {
    if (better(a, best)) best = a;
  }
  return best;
}

void update_node_score(TreeNode& node, double reward) {
  if (!(reward >= 0.0 && reward <= 1.0)) throw DomainError("reward must be in [0, 1], got " + std::to_string(reward));
  // Same value as (n * mean + r) / (n + 1), written so that r == mean leaves
  // the mean bit-identical.
  const double n = static_cast<double>(node.eval_count);
  node.mean_score += (reward - node.mean_score) / (n + 1.0);
  node.eval_count += 1;
}

NodeId final_selection(const GenerationTree& tree, double confidence) {
  NodeId best = tree.root().id;
  double best_bound = -INFINITY;
  for (const auto& node : tree.nodes()) {
    const double bound = lcb_eval(node.mean_score, node.eval_count, tree.total_evals(), confidence);
    if (bound > best_bound) {
      best_bound = bound;
      best = node.id;
    }
  }
  return best;
}

const char* to_string(ActionKind kind) { return kind == ActionKind::evaluate ? "Evaluate" : "Generate"; }

}  // namespace memosearch::policy
