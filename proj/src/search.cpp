#include "memosearch/search.hpp"

#include <sstream>

#include "memosearch/log.hpp"
#include "memosearch/policy.hpp"

namespace memosearch {

namespace {

struct Evaluated {
  FullEvalResult result;
  int index = 0;
};

// A failed evaluation aborts the attempt; the round gets one more try.
Evaluated evaluate_with_retry(FullEvaluator& evaluator, const CandidateArtifact& candidate, int round,
                              SearchState& state, JournalSink& journal) {
  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int index = state.evaluations_started++;
    try {
      return {evaluator.evaluate(candidate, index), index};
    } catch (const JournalError&) {
      throw;
    } catch (const Error& e) {
      last_error = e.what();
      log::warn("round " + std::to_string(round) + ": evaluation of " + candidate.candidate_id + " failed (attempt " +
                std::to_string(attempt + 1) + "): " + last_error);
      journal.round_aborted(round, attempt, last_error);
    }
  }
  throw SearchError("round " + std::to_string(round) + ": evaluation of " + candidate.candidate_id +
                    " failed twice: " + last_error);
}

}  // namespace

std::string serialize_rng(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 deserialize_rng(const std::string& state) {
  std::istringstream is(state);
  std::mt19937_64 rng;
  is >> rng;
  if (is.fail()) throw CorruptionError("unreadable rng checkpoint");
  return rng;
}

SearchState start_search(const SearchConfig& config, const CandidateArtifact& root, FullEvaluator& evaluator,
                         JournalSink& journal) {
  config.validate();
  SearchState state{GenerationTree{}, std::mt19937_64(config.rng_seed), 0, {}};
  Evaluated root_eval = evaluate_with_retry(evaluator, root, 0, state, journal);
  state.tree = GenerationTree::init(root, root_eval.result.score);
  journal.node_inserted(state.tree.root(), std::nullopt);
  journal.evaluation(NodeId::root(), root_eval.index, root_eval.result);
  state.latest.emplace(NodeId::root(), std::move(root_eval.result));
  return state;
}

SearchOutcome continue_search(const SearchConfig& config, SearchState state, FullEvaluator& evaluator,
                              MutatorPipeline& mutator, JournalSink& journal) {
  config.validate();
  GenerationTree& tree = state.tree;
  for (int round = tree.rounds_completed() + 1; round <= config.search_steps; ++round) {
    const policy::ActionScore action = policy::select_action(policy::enumerate_actions(tree, config));
    RoundRecord record;
    record.round_index = round;
    record.target = action.node;

    if (action.kind == policy::ActionKind::evaluate) {
      Evaluated ev = evaluate_with_retry(evaluator, tree.node(action.node).candidate, round, state, journal);
      tree.record_evaluation(action.node, ev.result.score);
      journal.evaluation(action.node, ev.index, ev.result);
      record.action = RoundAction::evaluate;
      record.score = ev.result.score;
      record.consumed_full_eval = true;
      state.latest[action.node] = std::move(ev.result);
    } else {
      const double snapshot = tree.node(action.node).mean_score;
      auto latest = state.latest.find(action.node);
      GenerationRequest request{tree, action.node, latest == state.latest.end() ? nullptr : &latest->second, round,
                                state.rng};
      GenerationResult gen = mutator.generate(request);
      journal.generation(round, gen);
      record.exams = gen.exams;
      if (!gen.child) {
        record.action = RoundAction::failed_generate;
      } else {
        if (!gen.child->exam_report.passed())
          throw SearchError("round " + std::to_string(round) + ": mutator returned a candidate that failed its exam");
        Evaluated ev = evaluate_with_retry(evaluator, *gen.child, round, state, journal);
        const NodeId child = tree.insert_child(action.node, *gen.child, ev.result.score, snapshot);
        journal.node_inserted(tree.node(child), snapshot);
        journal.evaluation(child, ev.index, ev.result);
        record.action = RoundAction::generate;
        record.result_node = child;
        record.score = ev.result.score;
        record.consumed_full_eval = true;
        state.latest[child] = std::move(ev.result);
      }
    }
    tree.append_round(record);
    journal.round_completed(record, serialize_rng(state.rng), state.evaluations_started);
    log::info("round " + std::to_string(round) + ": " + to_string(record.action) + " " + to_string(record.target) +
              (record.score ? " score " + std::to_string(*record.score) : std::string{}));
  }
  const NodeId selected = policy::final_selection(tree, config.lcb_confidence());
  return {std::move(state.tree), selected};
}

SearchOutcome run_search(const SearchConfig& config, const CandidateArtifact& root, FullEvaluator& evaluator,
                         MutatorPipeline& mutator, JournalSink& journal) {
  return continue_search(config, start_search(config, root, evaluator, journal), evaluator, mutator, journal);
}

}  // namespace memosearch
