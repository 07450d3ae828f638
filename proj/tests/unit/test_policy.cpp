#include <cmath>
#include <random>

#include "doctest.h"
#include "memosearch/policy.hpp"
#include "support.hpp"

using namespace mstest;
namespace pol = memosearch::policy;

namespace {

constexpr double kTol = 1e-9;

}  // namespace

TEST_CASE("formula values match the oracle") {
  const Json o = policy_oracle();
  for (const auto& c : o["ucb_eval"]) {
    const auto& a = c["args"];
    CHECK(std::abs(pol::ucb_eval(a[0], a[1], a[2], a[3]) - c["value"].get<double>()) <= kTol);
  }
  for (const auto& c : o["positive_improvement"]) {
    const auto& a = c["args"];
    CHECK(std::abs(pol::positive_improvement(a[0], a[1]) - c["value"].get<double>()) <= kTol);
  }
  for (const auto& c : o["local_potential"]) {
    const auto& a = c["args"];
    CHECK(std::abs(pol::local_potential(a[0], a[1], a[2], a[3], a[4], a[5]) - c["value"].get<double>()) <= kTol);
  }
  for (const auto& c : o["ucb_gen"]) {
    const auto& a = c["args"];
    CHECK(std::abs(pol::ucb_gen(a[0], a[1], a[2], a[3], a[4], a[5]) - c["value"].get<double>()) <= kTol);
  }
  for (const auto& c : o["update_node_score"]) {
    const auto& a = c["args"];
    TreeNode n;
    n.mean_score = a[0];
    n.eval_count = a[1];
    pol::update_node_score(n, a[2]);
    CHECK(std::abs(n.mean_score - c["value"].get<double>()) <= kTol);
    CHECK(n.eval_count == c["count"].get<int>());
  }
}

TEST_CASE("final selection prefers the better-sampled node") {
  const Json f = policy_oracle()["final_selection"];
  GenerationTree t = GenerationTree::init(stub_candidate("root"), 0.0);
  const NodeId a = t.insert_child(NodeId::root(), stub_candidate("a"), 0.8, 0.0);
  const NodeId b = t.insert_child(NodeId::root(), stub_candidate("b"), 0.7, 0.0);
  for (int i = 0; i < 3; ++i) t.record_evaluation(b, 0.7);
  while (t.total_evals() < f["total_evals"].get<int>()) t.record_evaluation(NodeId::root(), 0.0);
  REQUIRE(t.total_evals() == 55);
  const double c = f["confidence"];
  CHECK(std::abs(pol::lcb_eval(0.8, 1, 55, c) - f["lcb_a"].get<double>()) <= kTol);
  CHECK(std::abs(pol::lcb_eval(t.node(b).mean_score, 4, 55, c) - f["lcb_b"].get<double>()) <= kTol);
  CHECK(pol::final_selection(t, c) == (f["selected"] == "b" ? b : a));
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(pol::ucb_eval(0.5, 0, 3, 0.2), DomainError);
  CHECK_THROWS_AS(pol::ucb_eval(0.5, 1, 0, 0.2), DomainError);
  CHECK_THROWS_AS(pol::local_potential(0.5, 0.2, 0.0, 0, 0.5, 0.0), DomainError);
  CHECK_THROWS_AS(pol::ucb_gen(0.5, 0.1, 0, 3, 0.2, -1.0), DomainError);
  TreeNode n;
  n.eval_count = 1;
  CHECK_THROWS_AS(pol::update_node_score(n, 1.5), DomainError);
  CHECK_THROWS_AS(pol::select_action({}), DomainError);
}

TEST_CASE("tie-breaking: evaluate before generate, then lower id") {
  using K = pol::ActionKind;
  std::vector<pol::ActionScore> acts{{K::generate, NodeId{0}, 0.5}, {K::evaluate, NodeId{2}, 0.5},
                                     {K::evaluate, NodeId{1}, 0.5}, {K::generate, NodeId{1}, 0.4}};
  CHECK(pol::select_action(acts) == pol::ActionScore{K::evaluate, NodeId{1}, 0.5});
  acts = {{K::generate, NodeId{3}, 0.5}, {K::generate, NodeId{1}, 0.5}};
  CHECK(pol::select_action(acts).node == NodeId{1});
}

TEST_CASE("fresh root: both actions score the mean") {
  GenerationTree t = GenerationTree::init(stub_candidate("root"), 0.2);
  const auto acts = pol::enumerate_actions(t, golden_config());
  REQUIRE(acts.size() == 2);
  CHECK(acts[0].score == 0.2);
  CHECK(acts[1].score == 0.2);
  CHECK(pol::select_action(acts).kind == pol::ActionKind::evaluate);
}

TEST_CASE("eligibility follows the minimum width") {
  GenerationTree t = GenerationTree::init(stub_candidate("root"), 0.2);
  const NodeId a = t.insert_child(NodeId::root(), stub_candidate("a"), 0.3, 0.2);
  CHECK(pol::eligible_set(t, 2) == std::set<NodeId>{NodeId::root()});
  const NodeId b = t.insert_child(NodeId::root(), stub_candidate("b"), 0.3, 0.2);
  CHECK(pol::eligible_set(t, 2) == std::set<NodeId>{NodeId::root(), a, b});
  const NodeId c = t.insert_child(a, stub_candidate("c"), 0.3, 0.3);
  CHECK_FALSE(pol::eligible_set(t, 2).contains(c));
  CHECK(pol::eligible_set(t, 1).contains(c));
}

TEST_CASE("brute-force equivalence on 1000 random trees") {
  std::mt19937_64 rng(7);
  int generates = 0;
  for (int i = 0; i < 1000; ++i) {
    const GenerationTree t = random_tree(rng, 20);
    const SearchConfig c = random_config(rng);
    const auto got = pol::select_action(pol::enumerate_actions(t, c));
    const auto want = brute_force_best(t, c);
    REQUIRE(got == want);
    generates += got.kind == pol::ActionKind::generate;
  }
  // Both branches are exercised.
  CHECK(generates > 50);
  CHECK(generates < 950);
}

TEST_CASE("snapshot invariance under parent re-evaluation") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    GenerationTree t = random_tree(rng, 8);
    const NodeId parent{static_cast<std::uint32_t>(rng() % t.size())};
    const double snap = t.node(parent).mean_score;
    const NodeId child = t.insert_child(parent, stub_candidate("x"), u(rng), snap);
    const double s_before = t.node(parent).cumulative_improvement;
    const double delta_before = t.node(parent).child_improvements.at(child);
    for (int k = 0; k < 5; ++k) t.record_evaluation(parent, u(rng));
    CHECK(t.node(parent).cumulative_improvement == s_before);
    CHECK(t.node(parent).child_improvements.at(child) == delta_before);
    CHECK(*t.node(child).parent_snapshot == snap);
    // Re-evaluating the child also leaves the stored improvement alone.
    t.record_evaluation(child, u(rng));
    CHECK(t.node(parent).child_improvements.at(child) == delta_before);
  }
}

TEST_CASE("monotonicity of the bounds") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double m = u(rng), c = u(rng);
    const int N = 2 + static_cast<int>(rng() % 100);
    const int n = 1 + static_cast<int>(rng() % N);
    CHECK(pol::ucb_eval(m, n, N, c) >= m);
    CHECK(pol::lcb_eval(m, n, N, c) <= m);
    CHECK(pol::ucb_eval(m, n, N + 1, c) >= pol::ucb_eval(m, n, N, c));
    CHECK(pol::ucb_eval(m, n + 1, N, c) <= pol::ucb_eval(m, n, N, c));
    CHECK(pol::ucb_eval(std::min(1.0, m + 0.1), n, N, c) >= pol::ucb_eval(m, n, N, c));
    const int K = static_cast<int>(rng() % 5);
    CHECK(pol::ucb_gen(m, 0.1, K + 1, N, c, 1.0) <= pol::ucb_gen(m, 0.1, K, N, c, 1.0));
    CHECK(pol::local_potential(m, 0.0, 0.2, K, 0.5, 1.0) >= 0.0);
  }
}

TEST_CASE("final selection is the LCB argmax with ties to the lower id") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const GenerationTree t = random_tree(rng, 12);
    const NodeId got = pol::final_selection(t, 0.2);
    double best = -INFINITY;
    NodeId want;
    for (const auto& n : t.nodes()) {
      const double b = pol::lcb_eval(n.mean_score, n.eval_count, t.total_evals(), 0.2);
      if (b > best) best = b, want = n.id;
    }
    CHECK(got == want);
  }
  GenerationTree t = GenerationTree::init(stub_candidate("root"), 0.5);
  t.insert_child(NodeId::root(), stub_candidate("a"), 0.5, 0.5);
  CHECK(pol::final_selection(t, 0.2) == NodeId::root());
}

TEST_CASE("running mean equals the arithmetic mean") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TreeNode n;
  n.mean_score = u(rng);
  n.eval_count = 1;
  double sum = n.mean_score;
  for (int i = 2; i <= 200; ++i) {
    const double r = u(rng);
    sum += r;
    pol::update_node_score(n, r);
    CHECK(std::abs(n.mean_score - sum / i) <= 1e-12);
  }
  TreeNode same;
  same.mean_score = 0.3;
  same.eval_count = 4;
  pol::update_node_score(same, 0.3);
  CHECK(same.mean_score == 0.3);
}
