#include "memosearch/tree.hpp"

#include <cmath>
#include <numeric>

#include "memosearch/policy.hpp"

namespace memosearch {

std::string to_string(NodeId id) { return std::to_string(id.value); }

GenerationTree GenerationTree::init(CandidateArtifact root_candidate, double root_score) {
  if (!(root_score >= 0.0 && root_score <= 1.0))
    throw DomainError("root score must be in [0, 1], got " + std::to_string(root_score));
  GenerationTree tree;
  TreeNode root;
  root.id = NodeId::root();
  root.candidate = std::move(root_candidate);
  root.mean_score = root_score;
  root.first_score = root_score;
  root.eval_count = 1;
  tree.nodes_.push_back(std::move(root));
  tree.total_evals_ = 1;
  return tree;
}

const TreeNode& GenerationTree::node(NodeId id) const {
  if (!contains(id)) throw DomainError("unknown node " + to_string(id));
  return nodes_[id.value];
}

TreeNode& GenerationTree::mutable_node(NodeId id) {
  if (!contains(id)) throw DomainError("unknown node " + to_string(id));
  return nodes_[id.value];
}

void GenerationTree::record_evaluation(NodeId id, double reward) {
  policy::update_node_score(mutable_node(id), reward);
  total_evals_ += 1;
}

NodeId GenerationTree::insert_child(NodeId parent_id, CandidateArtifact candidate, double child_score,
                                    double parent_snapshot) {
  if (!(child_score >= 0.0 && child_score <= 1.0))
    throw DomainError("child score must be in [0, 1], got " + std::to_string(child_score));
  mutable_node(parent_id);  // validates
  const NodeId id{static_cast<std::uint32_t>(nodes_.size())};
  TreeNode child;
  child.id = id;
  child.parent = parent_id;
  child.candidate = std::move(candidate);
  child.mean_score = child_score;
  child.first_score = child_score;
  child.eval_count = 1;
  child.parent_snapshot = parent_snapshot;
  nodes_.push_back(std::move(child));

  TreeNode& parent = nodes_[parent_id.value];
  const double delta = policy::positive_improvement(child_score, parent_snapshot);
  parent.child_improvements.emplace(id, delta);
  parent.cumulative_improvement += delta;
  parent.children.push_back(id);
  total_evals_ += 1;
  return id;
}

void GenerationTree::append_round(RoundRecord record) {
  if (record.action == RoundAction::failed_generate && record.consumed_full_eval)
    throw DomainError("a failed generation cannot consume a full evaluation");
  round_log_.push_back(std::move(record));
}

void GenerationTree::check_invariants() const {
  if (nodes_.empty()) throw CorruptionError("tree has no root");
  if (nodes_.front().parent) throw CorruptionError("root has a parent");
  int evals = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.id.value != i) throw CorruptionError("node ids are not dense at " + std::to_string(i));
    if (n.eval_count < 1) throw CorruptionError("node " + to_string(n.id) + " has no evaluation");
    if (i > 0) {
      if (!n.parent || n.parent->value >= i) throw CorruptionError("node " + to_string(n.id) + " has a bad parent");
    }
    if (n.child_improvements.size() != n.children.size())
      throw CorruptionError("node " + to_string(n.id) + " child statistics disagree");
    double sum = 0.0;
    for (NodeId c : n.children) {
      auto it = n.child_improvements.find(c);
      if (it == n.child_improvements.end() || it->second < 0.0)
        throw CorruptionError("node " + to_string(n.id) + " has a bad improvement entry");
      sum += it->second;
    }
    if (std::abs(sum - n.cumulative_improvement) > 1e-12)
      throw CorruptionError("node " + to_string(n.id) + " cumulative improvement mismatch");
    evals += n.eval_count;
  }
  if (evals != total_evals_) throw CorruptionError("total evaluation count mismatch");
}

const char* to_string(RoundAction action) {
  switch (action) {
    case RoundAction::evaluate: return "Evaluate";
    case RoundAction::generate: return "Generate";
    case RoundAction::failed_generate: return "FailedGenerate";
  }
  return "Evaluate";
}

RoundAction round_action_from_string(const std::string& s) {
  if (s == "Evaluate") return RoundAction::evaluate;
  if (s == "Generate") return RoundAction::generate;
  if (s == "FailedGenerate") return RoundAction::failed_generate;
  throw SchemaError("/action", "unknown round action '" + s + "'");
}

Json to_json(const RoundRecord& r) {
  Json j;
  j["round"] = r.round_index;
  j["action"] = to_string(r.action);
  j["target"] = r.target.value;
  j["result_node"] = r.result_node ? Json(r.result_node->value) : Json(nullptr);
  j["score"] = r.score ? Json(*r.score) : Json(nullptr);
  j["consumed_full_eval"] = r.consumed_full_eval;
  j["exams"] = r.exams;
  return j;
}

RoundRecord round_record_from_json(const Json& j) {
  RoundRecord r;
  r.round_index = j.at("round").get<int>();
  r.action = round_action_from_string(j.at("action").get<std::string>());
  r.target = NodeId{j.at("target").get<std::uint32_t>()};
  if (auto it = j.find("result_node"); it != j.end() && !it->is_null()) r.result_node = NodeId{it->get<std::uint32_t>()};
  if (auto it = j.find("score"); it != j.end() && !it->is_null()) r.score = it->get<double>();
  r.consumed_full_eval = j.at("consumed_full_eval").get<bool>();
  r.exams = j.value("exams", 0);
  return r;
}

Json to_json(const TreeNode& n) {
  Json j;
  j["id"] = n.id.value;
  j["parent"] = n.parent ? Json(n.parent->value) : Json(nullptr);
  j["candidate_id"] = n.candidate.candidate_id;
  j["mean"] = n.mean_score;
  j["n"] = n.eval_count;
  j["first_score"] = n.first_score;
  j["K"] = n.child_count();
  j["S"] = n.cumulative_improvement;
  Json deltas = Json::object();
  for (const auto& [child, delta] : n.child_improvements) deltas[to_string(child)] = delta;
  j["child_improvements"] = deltas;
  j["parent_snapshot"] = n.parent_snapshot ? Json(*n.parent_snapshot) : Json(nullptr);
  return j;
}

Json to_json(const GenerationTree& tree) {
  Json nodes = Json::array();
  for (const auto& n : tree.nodes()) nodes.push_back(to_json(n));
  Json rounds = Json::array();
  for (const auto& r : tree.round_log()) rounds.push_back(to_json(r));
  return Json{{"total_evals", tree.total_evals()}, {"nodes", nodes}, {"rounds", rounds}};
}

}  // namespace memosearch
