#include "support.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>
#include <cmath>

#include "memosearch/policy.hpp"

namespace mstest {
namespace fs = std::filesystem;

QuickExamReport passing_report() {
  QuickExamReport r;
  for (const char* name : {kExamHandshake, kExamInterface, kExamUpdate, kExamRetrieve, kExamSchema, kExamBudget})
    r.checks.push_back({name, CheckStatus::pass, ""});
  return r;
}

QuickExamReport failing_report(const std::string& failing) {
  QuickExamReport r;
  bool failed = false;
  for (const char* name : {kExamHandshake, kExamInterface, kExamUpdate, kExamRetrieve, kExamSchema, kExamBudget}) {
    CheckStatus s = failed ? CheckStatus::skipped : CheckStatus::pass;
    if (!failed && failing == name) {
      s = CheckStatus::fail;
      failed = true;
    }
    r.checks.push_back({name, s, s == CheckStatus::fail ? "scripted failure" : ""});
  }
  return r;
}

TempDir::TempDir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  for (;;) {
    path_ = fs::temp_directory_path() / (tag + "-" + std::to_string(rng() % 1000000000ULL));
    if (fs::create_directories(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

namespace {

FullEvalResult result_with_score(const std::string& id, double score) {
  FullEvalResult r;
  r.candidate_id = id;
  r.score = score;
  TaskOutcome o;
  o.task_id = "t0";
  o.reward = score;
  o.evidence = partial_task("t0", "scripted task");
  o.evidence.reward = score;
  r.outcomes.push_back(o);
  return r;
}

std::string f9(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", x);
  return buf;
}

}  // namespace

FullEvalResult ScriptedEvaluator::evaluate(const CandidateArtifact& candidate, int evaluation_index) {
  calls.emplace_back(candidate.candidate_id, evaluation_index);
  if (fail_indices.contains(evaluation_index)) throw EvaluationError("scripted evaluation failure");
  auto it = scores.find(candidate.candidate_id);
  return result_with_score(candidate.candidate_id, it == scores.end() ? fallback : it->second);
}

FullEvalResult SequenceEvaluator::evaluate(const CandidateArtifact& candidate, int) {
  if (candidate.candidate_id == "root") return result_with_score("root", root_score);
  auto it = assigned_.find(candidate.candidate_id);
  if (it == assigned_.end()) {
    const std::size_t k = assigned_.size();
    const double s = k < child_scores.size() ? child_scores[k] : child_scores.back();
    it = assigned_.emplace(candidate.candidate_id, s).first;
  }
  return result_with_score(candidate.candidate_id, it->second);
}

GenerationResult ScriptedPipeline::generate(const GenerationRequest& request) {
  rounds_seen.push_back(request.round);
  GenerationResult r;
  CandidateArtifact child = stub_candidate(child_candidate_id(request.round));
  child.parent_id = request.tree.node(request.parent).candidate.candidate_id;
  child.created_round = request.round;
  if (fail_rounds.contains(request.round)) {
    child.exam_report = failing_report(kExamSchema);
    r.attempts.push_back(child);
    r.final_report = child.exam_report;
    r.exams = exams_on_failure;
    return r;
  }
  child.exam_report = passing_report();
  r.attempts.push_back(child);
  r.final_report = child.exam_report;
  r.exams = 1;
  r.child = child;
  return r;
}

void RecordingJournal::node_inserted(const TreeNode& node, const std::optional<double>& snap) {
  events.push_back({"node", Json{{"node", node.id.value}, {"snapshot", snap ? Json(*snap) : Json(nullptr)}}});
}
void RecordingJournal::evaluation(NodeId node, int idx, const FullEvalResult& result) {
  events.push_back({"evaluation", Json{{"node", node.value}, {"index", idx}, {"score", result.score}}});
}
void RecordingJournal::generation(int round, const GenerationResult& result) {
  events.push_back({"generation", Json{{"round", round}, {"exams", result.exams}, {"accepted", bool(result.child)}}});
}
void RecordingJournal::round_aborted(int round, int attempt, const std::string& reason) {
  events.push_back({"aborted", Json{{"round", round}, {"attempt", attempt}, {"reason", reason}}});
}
void RecordingJournal::round_completed(const RoundRecord& record, const std::string&, int started) {
  events.push_back({"round", Json{{"record", to_json(record)}, {"evaluations_started", started}}});
}
int RecordingJournal::count(const std::string& type) const {
  int n = 0;
  for (const auto& e : events) n += e.type == type;
  return n;
}

CandidateArtifact stub_candidate(const std::string& id) {
  CandidateArtifact c;
  c.candidate_id = id;
  c.program.command = {"builtin:empty"};
  c.exam_report = passing_report();
  return c;
}

GenerationTree random_tree(std::mt19937_64& rng, int max_nodes) {
  std::uniform_int_distribution<int> count(1, max_nodes);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Coarse scores make exact ties common.
  auto score = [&] { return (rng() % 2 == 0) ? static_cast<double>(rng() % 5) / 4.0 : unit(rng); };
  const int n = count(rng);
  GenerationTree tree = GenerationTree::init(stub_candidate("root"), score());
  for (int i = 1; i < n; ++i) {
    const NodeId parent{static_cast<std::uint32_t>(rng() % tree.size())};
    tree.insert_child(parent, stub_candidate("g" + std::to_string(i)), score(), tree.node(parent).mean_score);
    const int reevals = static_cast<int>(rng() % 3);
    for (int k = 0; k < reevals; ++k)
      tree.record_evaluation(NodeId{static_cast<std::uint32_t>(rng() % tree.size())}, score());
  }
  return tree;
}

SearchConfig golden_config() {
  SearchConfig c;
  c.search_steps = 3;
  c.eval_confidence = 0.2;
  c.gen_confidence = 0.2;
  c.prior_strength = 0.5;
  c.prior_pseudocount = 1.0;
  c.min_width = 2;
  return c;
}

SearchOutcome golden_run(int steps) {
  SearchConfig c = golden_config();
  c.search_steps = steps;
  SequenceEvaluator evaluator;
  evaluator.root_score = 0.2;
  evaluator.child_scores = {0.5, 0.4, 0.45};
  ScriptedPipeline pipeline;
  NullJournal journal;
  if (steps == 0) {
    // Root only: the state before round 1.
    SearchState state = start_search(golden_config(), stub_candidate("root"), evaluator, journal);
    return SearchOutcome{state.tree, NodeId::root()};
  }
  return run_search(c, stub_candidate("root"), evaluator, pipeline, journal);
}

std::string golden_trace_text() {
  const SearchConfig config = golden_config();
  std::ostringstream out;
  SearchOutcome final_run = golden_run(config.search_steps);
  const GenerationTree& tree = final_run.tree;
  out << "init root=" << f9(tree.root().first_score) << "\n";
  for (int r = 1; r <= config.search_steps; ++r) {
    SearchOutcome before = golden_run(r - 1);
    out << "round " << r << " actions:";
    for (const auto& a : policy::enumerate_actions(before.tree, config))
      out << " " << (a.kind == policy::ActionKind::evaluate ? "evaluate" : "generate") << "(" << a.node.value << ")=" << f9(a.score);
    out << "\n";
    SearchOutcome after = golden_run(r);
    const RoundRecord& rec = tree.round_log()[static_cast<std::size_t>(r - 1)];
    out << "round " << r << ": ";
    if (rec.action == RoundAction::evaluate) {
      out << "evaluate node " << rec.target.value;
    } else if (rec.action == RoundAction::generate) {
      out << "generate node " << rec.target.value << " -> node " << rec.result_node->value;
    } else {
      out << "failed_generate node " << rec.target.value;
    }
    if (rec.score) out << " score=" << f9(*rec.score);
    out << " N=" << after.tree.total_evals() << "\n";
  }
  for (const auto& n : tree.nodes()) {
    out << "node " << n.id.value << " parent=" << (n.parent ? std::to_string(n.parent->value) : "-")
        << " mean=" << f9(n.mean_score) << " n=" << n.eval_count << " K=" << n.child_count()
        << " S=" << f9(n.cumulative_improvement);
    if (n.parent_snapshot) out << " snapshot=" << f9(*n.parent_snapshot);
    out << "\n";
  }
  out << "lcb";
  for (const auto& n : tree.nodes())
    out << " node " << n.id.value << "="
        << f9(policy::lcb_eval(n.mean_score, n.eval_count, tree.total_evals(), config.lcb_confidence()));
  out << "\nselected: node " << final_run.selected.value << "\n";
  return out.str();
}

EpisodeRecorder finished_episode(const std::string& id, const std::string& text, double reward) {
  EpisodeRecorder e;
  e.task_id = id;
  e.init.task_text = text;
  StepRecord s;
  s.index = 0;
  s.action_text = "act";
  s.observation_text = "observed " + text;
  e.steps.push_back(s);
  e.reward = reward;
  return e;
}

EpisodeRecorder partial_task(const std::string& id, const std::string& text) {
  EpisodeRecorder e;
  e.task_id = id;
  e.init.task_text = text;
  return e;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json policy_oracle() {
  std::ifstream in(fs::path(MS_GOLDEN_DIR) / "policy_oracle.json");
  if (!in) throw std::runtime_error("policy oracle missing");
  return Json::parse(in);
}

policy::ActionScore brute_force_best(const GenerationTree& tree, const SearchConfig& c) {
  const auto& nodes = tree.nodes();
  const double N = static_cast<double>(tree.total_evals());
  std::vector<int> kids(nodes.size(), 0);
  std::vector<double> s(nodes.size(), 0.0);
  for (const auto& n : nodes) {
    if (!n.parent) continue;
    kids[n.parent->value] += 1;
    s[n.parent->value] += std::max(0.0, n.first_score - *n.parent_snapshot);
  }
  using Key = std::tuple<double, int, long>;  // score, evaluate-first, lower id
  Key best{-INFINITY, 0, 0};
  policy::ActionScore out;
  auto offer = [&](policy::ActionKind kind, std::uint32_t id, double score) {
    Key k{score, kind == policy::ActionKind::evaluate ? 1 : 0, -static_cast<long>(id)};
    if (k > best) {
      best = k;
      out = {kind, NodeId{id}, score};
    }
  };
  for (const auto& n : nodes)
    offer(policy::ActionKind::evaluate, n.id.value,
          n.mean_score + c.eval_confidence * std::sqrt(std::log(N) / static_cast<double>(n.eval_count)));
  const double mu0 = nodes[0].mean_score;
  for (const auto& n : nodes) {
    const bool eligible = !n.parent || kids[n.parent->value] >= c.min_width;
    if (!eligible) continue;
    const int K = kids[n.id.value];
    const double prior = c.prior_strength * std::max(0.0, n.mean_score - mu0);
    const double pot = (c.prior_pseudocount * prior + s[n.id.value]) / (c.prior_pseudocount + K);
    offer(policy::ActionKind::generate, n.id.value,
          n.mean_score + pot + c.gen_confidence * std::sqrt(std::log(N) / (c.prior_pseudocount + K)));
  }
  return out;
}

SearchConfig random_config(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SearchConfig c;
  c.eval_confidence = (rng() % 3 == 0) ? 0.2 : u(rng);
  c.gen_confidence = (rng() % 3 == 0) ? 0.2 : u(rng);
  c.prior_strength = u(rng);
  c.prior_pseudocount = 0.25 + 2.0 * u(rng);
  c.min_width = 1 + static_cast<int>(rng() % 3);
  return c;
}


namespace {

std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
  static const std::vector<std::string> pieces{"a", "memory ", "z", "\xc3\xa9", "\xe2\x82\xac", "\xf0\x9f\x98\x80",
                                               "\"", "\\", "\n", "0123456789"};
  std::string s;
  const std::size_t len = rng() % (max_len + 1);
  while (s.size() < len) s += pieces[rng() % pieces.size()];
  return s;
}

}  // namespace

RetrievedMemoryPayload random_payload(std::mt19937_64& rng) {
  RetrievedMemoryPayload p;
  const int items = static_cast<int>(rng() % 12);
  for (int i = 0; i < items; ++i) {
    MemoryItem item;
    if (rng() % 4 != 0) item.text = random_text(rng, (rng() % 5 == 0) ? 30'000 : 200);
    if (rng() % 2 == 0) {
      std::vector<ImageRef> imgs;
      const int n = static_cast<int>(rng() % 4);
      for (int k = 0; k < n; ++k)
        imgs.push_back({rng() % 2 ? ImageKind::path : ImageKind::url,
                        rng() % 2 ? "img/" + std::to_string(i) + "_" + std::to_string(k) + ".png"
                                  : "https://example.org/" + std::to_string(i) + "/" + std::to_string(k),
                        std::nullopt});
      item.images = imgs;
    }
    if (!item.text && !item.images) item.metadata = Json{{"i", i}};
    p.items.push_back(item);
  }
  return p;
}

std::vector<ImageRef> all_images(const RetrievedMemoryPayload& p) {
  std::vector<ImageRef> out;
  for (const auto& item : p.items)
    if (item.images) out.insert(out.end(), item.images->begin(), item.images->end());
  return out;
}

}  // namespace mstest
