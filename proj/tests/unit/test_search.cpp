#include "doctest.h"
#include "memosearch/policy.hpp"
#include "support.hpp"

using namespace mstest;

namespace {

struct FailingJournal : RecordingJournal {
  int fail_at_round = 1;
  void round_completed(const RoundRecord& record, const std::string& rng, int started) override {
    if (record.round_index == fail_at_round) throw JournalError("disk full");
    RecordingJournal::round_completed(record, rng, started);
  }
};

int full_evals_in_rounds(const GenerationTree& t) {
  int n = 0;
  for (const auto& r : t.round_log()) n += r.consumed_full_eval;
  return n;
}

}  // namespace

TEST_CASE("scripted T=3 run reproduces the golden trace") {
  const std::string want = read_file(std::string(MS_GOLDEN_DIR) + "/t3_trace.txt");
  REQUIRE_FALSE(want.empty());
  CHECK(golden_trace_text() == want);
}

TEST_CASE("golden run selects node 1") {
  const SearchOutcome out = golden_run();
  CHECK(out.selected == NodeId{1});
  CHECK(out.tree.total_evals() == 4);
  CHECK(out.tree.rounds_completed() == 3);
  out.tree.check_invariants();
}

TEST_CASE("T=0 evaluates only the root") {
  const SearchOutcome out = golden_run(0);
  CHECK(out.tree.size() == 1);
  CHECK(out.tree.total_evals() == 1);
  CHECK(out.tree.rounds_completed() == 0);
  CHECK(out.selected == NodeId::root());
}

TEST_CASE("failed generations consume rounds but no full evaluation") {
  SearchConfig c = golden_config();
  c.search_steps = 6;
  ScriptedEvaluator ev;
  ev.fallback = 0.3;
  ScriptedPipeline pipe;
  pipe.fail_rounds = {1, 2, 3, 4, 5, 6};
  RecordingJournal journal;
  const SearchOutcome out = run_search(c, stub_candidate("root"), ev, pipe, journal);
  int failed = 0;
  for (const auto& r : out.tree.round_log()) {
    failed += r.action == RoundAction::failed_generate;
    if (r.action == RoundAction::failed_generate) {
      CHECK_FALSE(r.consumed_full_eval);
      CHECK(r.exams == 4);
      CHECK_FALSE(r.score);
    }
  }
  CHECK(failed > 0);
  CHECK(out.tree.rounds_completed() == 6);
  CHECK(full_evals_in_rounds(out.tree) == 6 - failed);
  CHECK(out.tree.total_evals() == 1 + 6 - failed);
  CHECK(static_cast<int>(ev.calls.size()) == 1 + 6 - failed);
  CHECK(out.tree.size() == 1);
  CHECK(journal.count("generation") == failed);
}

TEST_CASE("always failing generation, T=2") {
  SearchConfig c = golden_config();
  c.search_steps = 2;
  SequenceEvaluator ev;
  ev.root_score = 0.2;
  ev.child_scores = {0.5};
  ScriptedPipeline pipe;
  pipe.fail_rounds = {1, 2};
  NullJournal journal;
  const SearchOutcome out = run_search(c, stub_candidate("root"), ev, pipe, journal);
  REQUIRE(out.tree.rounds_completed() == 2);
  CHECK(out.tree.round_log()[0].action == RoundAction::evaluate);
  CHECK(out.tree.round_log()[1].action == RoundAction::failed_generate);
  CHECK(out.tree.total_evals() == 2);
  CHECK(pipe.rounds_seen == std::vector<int>{2});
}

TEST_CASE("an evaluation failure is retried once") {
  SearchConfig c = golden_config();
  c.search_steps = 1;
  ScriptedEvaluator ev;
  ev.fallback = 0.2;
  ev.fail_indices = {1};
  ScriptedPipeline pipe;
  RecordingJournal journal;
  const SearchOutcome out = run_search(c, stub_candidate("root"), ev, pipe, journal);
  CHECK(out.tree.rounds_completed() == 1);
  CHECK(journal.count("aborted") == 1);
  REQUIRE(ev.calls.size() == 3);
  CHECK(ev.calls[2].second == 2);
  CHECK(out.tree.total_evals() == 2);
}

TEST_CASE("a second evaluation failure stops the search") {
  SearchConfig c = golden_config();
  ScriptedEvaluator ev;
  ev.fallback = 0.2;
  ev.fail_indices = {1, 2};
  ScriptedPipeline pipe;
  RecordingJournal journal;
  CHECK_THROWS_AS(run_search(c, stub_candidate("root"), ev, pipe, journal), SearchError);
  CHECK(journal.count("aborted") == 2);
  CHECK(journal.count("round") == 0);
}

TEST_CASE("a journal failure halts immediately") {
  SearchConfig c = golden_config();
  ScriptedEvaluator ev;
  ev.fallback = 0.2;
  ScriptedPipeline pipe;
  FailingJournal journal;
  journal.fail_at_round = 2;
  CHECK_THROWS_AS(run_search(c, stub_candidate("root"), ev, pipe, journal), JournalError);
  CHECK(journal.count("round") == 1);
  // Round 3 never started.
  for (const auto& call : ev.calls) CHECK(call.second <= 2);
}

TEST_CASE("invalid configuration is rejected before any evaluation") {
  SearchConfig c = golden_config();
  c.prior_pseudocount = 0.0;
  ScriptedEvaluator ev;
  ScriptedPipeline pipe;
  NullJournal journal;
  CHECK_THROWS_AS(run_search(c, stub_candidate("root"), ev, pipe, journal), ConfigError);
  CHECK(ev.calls.empty());
}

TEST_CASE("rng checkpoints round-trip") {
  std::mt19937_64 rng(42);
  rng.discard(17);
  std::mt19937_64 copy = deserialize_rng(serialize_rng(rng));
  CHECK(copy == rng);
  CHECK_THROWS_AS(deserialize_rng("not a state"), CorruptionError);
}

TEST_CASE("selected node is the LCB argmax of the final tree") {
  SearchConfig c = golden_config();
  c.search_steps = 10;
  SequenceEvaluator ev;
  ev.root_score = 0.3;
  ev.child_scores = {0.1, 0.6, 0.4, 0.9, 0.2, 0.5, 0.7, 0.3, 0.8, 0.6};
  ScriptedPipeline pipe;
  NullJournal journal;
  const SearchOutcome out = run_search(c, stub_candidate("root"), ev, pipe, journal);
  CHECK(out.tree.rounds_completed() == 10);
  CHECK(out.tree.total_evals() == 11);
  CHECK(out.selected == policy::final_selection(out.tree, c.eval_confidence));
  out.tree.check_invariants();
}
