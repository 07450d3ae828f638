#include <random>

#include "doctest.h"
#include "support.hpp"

using namespace mstest;
using namespace std::chrono_literals;

namespace {

// Mutator and repairer that only rename; the examiner decides via a script.
struct RenamingAgent : Mutator, Repairer {
  int mutations = 0;
  int repairs = 0;
  bool throw_adapter = false;
  std::string force_id;
  CandidateArtifact mutate(const CandidateArtifact&, const ReflectionFeedback&, const MutationContext& ctx) override {
    ++mutations;
    if (throw_adapter) throw AdapterError("endpoint unreachable");
    return stub_candidate(force_id.empty() ? ctx.candidate_id : force_id);
  }
  CandidateArtifact repair(const CandidateArtifact&, const QuickExamReport& report, const MutationContext& ctx) override {
    ++repairs;
    CHECK_FALSE(report.passed());
    return stub_candidate(ctx.candidate_id);
  }
};

// Passes on the exam with 1-based index pass_on; 0 never passes.
struct ScriptedExaminer : Examiner {
  int pass_on = 0;
  int exams = 0;
  std::vector<std::string> seen;
  QuickExamReport examine(const CandidateArtifact& c) override {
    ++exams;
    seen.push_back(c.candidate_id);
    return exams == pass_on ? passing_report() : failing_report(kExamSchema);
  }
};

RepairOutcome run_repair(int pass_on, int budget, RenamingAgent& agent, ScriptedExaminer& examiner) {
  examiner.pass_on = pass_on;
  return mutate_and_repair(stub_candidate("root"), ReflectionFeedback{}, agent, agent, budget, examiner,
                           MutationContext{5, child_candidate_id(5), 0.4});
}

CandidateArtifact builtin(const std::string& name) {
  CandidateArtifact c = stub_candidate(name);
  c.program.command = {"builtin:" + name};
  return c;
}

CandidateArtifact process(const std::string& name) {
  CandidateArtifact c = stub_candidate(name);
  c.program.command = {MS_REF_CANDIDATE, name};
  return c;
}

ExamInputs exam_inputs() {
  EvalBatches b;
  for (int i = 0; i < 5; ++i) {
    b.update_episodes.push_back(finished_episode("u" + std::to_string(i), "open door " + std::to_string(i), 1.0));
    b.retrieve_tasks.push_back(partial_task("r" + std::to_string(i), "open door " + std::to_string(i)));
  }
  SessionOptions s;
  s.call_timeout = 300ms;
  return make_exam_inputs(b, SearchConfig{}, s);
}

FullEvalResult outcomes(int successes, int failures) {
  FullEvalResult r;
  r.candidate_id = "p";
  for (int i = 0; i < successes + failures; ++i) {
    TaskOutcome o;
    o.task_id = "t" + std::to_string(i);
    o.reward = i < successes ? 1.0 : 0.0;
    o.evidence = finished_episode(o.task_id, "task " + std::to_string(i), o.reward);
    o.evidence.steps[0].observation_text = std::string(200, 'x');
    for (int k = 0; k < 6; ++k) o.evidence.init.images.push_back({ImageKind::url, "https://x/" + std::to_string(k), {}});
    MemoryItem item{std::string(300, 'm'), std::vector<ImageRef>{}, {}};
    for (int k = 0; k < 3; ++k) item.images->push_back({ImageKind::url, "https://m/" + std::to_string(k), {}});
    o.evidence.memory_retrieved = RetrievedMemoryPayload{{item}, Json::object()};
    r.outcomes.push_back(o);
  }
  return r;
}

}  // namespace

TEST_CASE("repair bound examples with L = 3") {
  {
    RenamingAgent agent;
    ScriptedExaminer examiner;
    const RepairOutcome r = run_repair(1, 3, agent, examiner);
    CHECK(r.exams == 1);
    CHECK(r.repairs == 0);
    REQUIRE(r.accepted);
    CHECK(r.accepted->candidate_id == "g5");
    CHECK(r.accepted->parent_id == "root");
    CHECK(r.accepted->created_round == 5);
    CHECK(r.accepted->feedback_digest == feedback_digest(ReflectionFeedback{}));
  }
  {
    RenamingAgent agent;
    ScriptedExaminer examiner;
    const RepairOutcome r = run_repair(2, 3, agent, examiner);
    CHECK(r.exams == 2);
    CHECK(r.repairs == 1);
    REQUIRE(r.accepted);
    CHECK(r.accepted->candidate_id == "g5-r1");
    CHECK(examiner.seen == std::vector<std::string>{"g5", "g5-r1"});
  }
  {
    RenamingAgent agent;
    ScriptedExaminer examiner;
    const RepairOutcome r = run_repair(0, 3, agent, examiner);
    CHECK(r.exams == 4);
    CHECK(r.repairs == 3);
    CHECK_FALSE(r.accepted);
    CHECK(r.attempts.size() == 4);
    CHECK(r.last.candidate_id == "g5-r3");
    CHECK(r.final_report.first_failure() == std::string(kExamSchema));
  }
}

TEST_CASE("never more than L + 1 exams per generation") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 500; ++i) {
    const int budget = static_cast<int>(rng() % 6);
    const int pass_on = static_cast<int>(rng() % 9);
    RenamingAgent agent;
    ScriptedExaminer examiner;
    const RepairOutcome r = run_repair(pass_on, budget, agent, examiner);
    CHECK(r.exams <= budget + 1);
    CHECK(examiner.exams == r.exams);
    CHECK(agent.mutations == 1);
    CHECK(agent.repairs == r.repairs);
    CHECK(r.repairs == r.exams - 1);
    CHECK(r.accepted.has_value() == (pass_on >= 1 && pass_on <= budget + 1));
  }
  RenamingAgent agent;
  ScriptedExaminer examiner;
  CHECK_THROWS_AS(run_repair(1, -1, agent, examiner), DomainError);
}

TEST_CASE("meta agent failures become lifecycle errors") {
  RenamingAgent agent;
  agent.throw_adapter = true;
  ScriptedExaminer examiner;
  CHECK_THROWS_AS(run_repair(1, 3, agent, examiner), LifecycleError);
  CHECK(examiner.exams == 0);
  RenamingAgent wrong;
  wrong.force_id = "elsewhere";
  CHECK_THROWS_AS(run_repair(1, 3, wrong, examiner), LifecycleError);
}

TEST_CASE("quick exam on reference candidates") {
  const ExamInputs inputs = exam_inputs();
  for (const std::string name : {"empty", "keyword"}) {
    const QuickExamReport r = quick_exam(builtin(name), inputs);
    CHECK_MESSAGE(r.passed(), name);
    CHECK(r.passed_count() == 6);
  }
  const std::vector<std::pair<std::string, std::string>> targeted{
      {"bad-schema", kExamSchema},   {"missing-retrieve", kExamInterface}, {"hang-update", kExamUpdate},
      {"crash-update", kExamUpdate}, {"too-many-images", kExamBudget},     {"protocol2", kExamHandshake},
      {"nonjson", kExamUpdate}};
  for (const auto& [name, check] : targeted) {
    for (const auto& c : {builtin(name), process(name)}) {
      const QuickExamReport r = quick_exam(c, inputs);
      CHECK_MESSAGE(r.first_failure() == check, name);
      // Later checks are skipped.
      bool after = false;
      for (const auto& ch : r.checks) {
        if (after) CHECK(ch.status == CheckStatus::skipped);
        after |= ch.status == CheckStatus::fail;
      }
    }
  }
  CHECK(quick_exam(process("keyword"), inputs).passed());
  CandidateArtifact ghost = stub_candidate("ghost");
  ghost.program.command = {"/nonexistent/memo"};
  CHECK(quick_exam(ghost, inputs).first_failure() == std::string(kExamHandshake));
}

TEST_CASE("exam inputs need enough retrieve tasks") {
  EvalBatches b;
  b.retrieve_tasks = {partial_task("r1", "x")};
  CHECK_THROWS_AS(make_exam_inputs(b, SearchConfig{}, SessionOptions{}), ConfigError);
  SearchConfig one;
  one.quick_test_tasks = 1;
  CHECK(make_exam_inputs(b, one, SessionOptions{}).sample_tasks.size() == 1);
}

TEST_CASE("evidence sampling respects the caps") {
  SearchConfig c;
  c.meta_observation_chars = 50;
  c.meta_memory_chars = 40;
  std::mt19937_64 rng(3);
  const EvidenceBundle b = sample_evidence(stub_candidate("p"), 2, outcomes(5, 4), c, rng, "source");
  CHECK(b.successes.size() == 2);
  CHECK(b.failures.size() == 2);
  CHECK(b.parent_source == "source");
  for (const auto* group : {&b.successes, &b.failures}) {
    for (const auto& s : *group) {
      CHECK(utf8_length(s.observation_summary) <= 50);
      CHECK(s.images.size() == 4);
      CHECK(utf8_length(s.memory_text) <= 40);
      CHECK(s.memory_images.size() == 2);
    }
  }
  for (const auto& s : b.successes) CHECK(s.reward >= kSuccessThreshold);
  for (const auto& s : b.failures) CHECK(s.reward < kSuccessThreshold);

  // Fewer outcomes than the caps: take what exists.
  const EvidenceBundle few = sample_evidence(stub_candidate("p"), 1, outcomes(1, 0), c, rng);
  CHECK(few.successes.size() == 1);
  CHECK(few.failures.empty());

  // Same rng state, same sample.
  std::mt19937_64 a(9), b2(9);
  const auto s1 = sample_evidence(stub_candidate("p"), 1, outcomes(6, 6), c, a);
  const auto s2 = sample_evidence(stub_candidate("p"), 1, outcomes(6, 6), c, b2);
  CHECK(to_json(s1) == to_json(s2));
}

TEST_CASE("feedback needs completed outcomes") {
  FullEvalResult r = outcomes(1, 1);
  for (auto& o : r.outcomes) o.status = OutcomeStatus::infrastructure_invalid;
  std::mt19937_64 rng(1);
  SummaryReflector reflector;
  CHECK_THROWS_AS(build_feedback(stub_candidate("p"), 1, r, SearchConfig{}, rng, reflector), LifecycleError);
  const ReflectionFeedback f = build_feedback(stub_candidate("p"), 1, outcomes(2, 2), SearchConfig{}, rng, reflector);
  CHECK(f.sampled_tasks.size() == 4);
  CHECK_FALSE(f.suggested_changes.empty());
}

TEST_CASE("labels and priorities are closed sets") {
  for (auto l : {PayloadLabel::useful, PayloadLabel::potentially_useful, PayloadLabel::irrelevant,
                 PayloadLabel::empty_bad_format})
    CHECK(payload_label_from_string(to_string(l)) == l);
  CHECK(std::string(to_string(PayloadLabel::empty_bad_format)) == "Empty/BadFormat");
  CHECK_THROWS_AS(payload_label_from_string("Sort-of-useful"), SchemaError);
  CHECK_THROWS_AS(payload_label_from_string("useful"), SchemaError);
  for (auto p : {Priority::high, Priority::medium, Priority::low}) CHECK(priority_from_string(to_string(p)) == p);
  CHECK_THROWS_AS(priority_from_string("Urgent"), SchemaError);
}

TEST_CASE("feedback JSON and digest") {
  ReflectionFeedback f;
  f.diagnosis = "memory is empty";
  f.assessments = {{PayloadLabel::empty_bad_format, "nothing retrieved"}};
  f.suggested_changes = {{Priority::high, "store summaries", "no recall"}};
  f.sampled_tasks = {"t1"};
  CHECK(feedback_from_json(to_json(f)) == f);
  CHECK(feedback_digest(f) == feedback_digest(feedback_from_json(to_json(f))));
  ReflectionFeedback g = f;
  g.diagnosis += ".";
  CHECK(feedback_digest(f) != feedback_digest(g));
  CHECK(feedback_digest(f).size() == 64);
}

TEST_CASE("exam report helpers") {
  const QuickExamReport r = failing_report(kExamRetrieve);
  CHECK_FALSE(r.passed());
  CHECK(r.passed_count() == 3);
  CHECK(r.first_failure() == std::string(kExamRetrieve));
  CHECK(exam_report_from_json(to_json(r)) == r);
  CHECK(passing_report().passed());
}
