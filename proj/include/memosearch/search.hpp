#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>

#include "memosearch/config.hpp"
#include "memosearch/harness.hpp"
#include "memosearch/lifecycle.hpp"
#include "memosearch/tree.hpp"

namespace memosearch {

// Receives search events as they happen. Every call must be durable before
// it returns; any exception halts the search.
class JournalSink {
 public:
  virtual ~JournalSink() = default;
  virtual void node_inserted(const TreeNode& node, const std::optional<double>& parent_snapshot) = 0;
  virtual void evaluation(NodeId node, int evaluation_index, const FullEvalResult& result) = 0;
  virtual void generation(int round, const GenerationResult& result) = 0;
  virtual void round_aborted(int round, int attempt, const std::string& reason) = 0;
  // rng_state and evaluations_started are the checkpoint after the round.
  virtual void round_completed(const RoundRecord& record, const std::string& rng_state, int evaluations_started) = 0;
};

class NullJournal : public JournalSink {
 public:
  void node_inserted(const TreeNode&, const std::optional<double>&) override {}
  void evaluation(NodeId, int, const FullEvalResult&) override {}
  void generation(int, const GenerationResult&) override {}
  void round_aborted(int, int, const std::string&) override {}
  void round_completed(const RoundRecord&, const std::string&, int) override {}
};

// Everything needed to continue a search after round rounds_completed().
struct SearchState {
  GenerationTree tree;
  std::mt19937_64 rng;
  int evaluations_started = 0;
  std::map<NodeId, FullEvalResult> latest;  // most recent full evaluation per node
};

struct SearchOutcome {
  GenerationTree tree;
  NodeId selected;
};

std::string serialize_rng(const std::mt19937_64& rng);
std::mt19937_64 deserialize_rng(const std::string& state);

// Evaluates the root, then runs config.search_steps rounds.
SearchOutcome run_search(const SearchConfig& config, const CandidateArtifact& root, FullEvaluator& evaluator,
                         MutatorPipeline& mutator, JournalSink& journal);

// Evaluates the root and records it; the state before round 1.
SearchState start_search(const SearchConfig& config, const CandidateArtifact& root, FullEvaluator& evaluator,
                         JournalSink& journal);

// Runs the remaining rounds of a (replayed or fresh) state.
SearchOutcome continue_search(const SearchConfig& config, SearchState state, FullEvaluator& evaluator,
                              MutatorPipeline& mutator, JournalSink& journal);

}  // namespace memosearch
