#include "memosearch/simlab.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "memosearch/policy.hpp"
#include "memosearch/reference_candidates.hpp"

namespace memosearch::sim {

namespace {

constexpr std::array<const char*, 12> kNouns = {"flight", "hotel",  "recipe", "laptop", "ticket", "jacket",
                                                "camera", "museum", "train",  "novel",  "bicycle", "concert"};
constexpr std::array<const char*, 12> kSites = {"skyport", "staybook", "cookpad", "techmart", "eventhub", "wearly",
                                                "lensworld", "artguide", "railnet", "readmore", "cyclebay", "showtime"};

std::string indexed(const char* word, int i, std::size_t n) {
  const auto u = static_cast<std::size_t>(i);
  return u < n ? std::string(word) : std::string(word) + std::to_string(u / n);
}

std::uint64_t key(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc908ULL);
  for (auto p : parts) h = mix64(h ^ p);
  return h;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

void LandscapeParams::validate() const {
  auto unit = [](double v, const char* field) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("landscape.") + field, "must be in [0, 1]");
  };
  unit(base_rate, "base_rate");
  unit(root_quality, "root_quality");
  if (!std::isfinite(gain)) throw ConfigError("landscape.gain", "must be finite");
  if (!(drift >= 0.0) || !std::isfinite(drift)) throw ConfigError("landscape.drift", "must be nonnegative");
  if (!std::isfinite(bias)) throw ConfigError("landscape.bias", "must be finite");
  if (update_tasks < 1) throw ConfigError("landscape.update_tasks", "must be positive");
  if (retrieve_tasks < 1) throw ConfigError("landscape.retrieve_tasks", "must be positive");
}

Json to_json(const LandscapeParams& p) {
  return Json{{"base_rate", p.base_rate},       {"gain", p.gain},           {"drift", p.drift},
              {"bias", p.bias},                 {"root_quality", p.root_quality}, {"seed", p.seed},
              {"zero_noise", p.zero_noise},     {"semantic", p.semantic},   {"update_tasks", p.update_tasks},
              {"retrieve_tasks", p.retrieve_tasks}};
}

LandscapeParams landscape_params_from_json(const Json& j, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix, "must be an object");
  LandscapeParams p;
  for (const auto& [k, v] : j.items()) {
    const std::string field = prefix + "." + k;
    try {
      if (k == "base_rate") p.base_rate = v.get<double>();
      else if (k == "gain") p.gain = v.get<double>();
      else if (k == "drift") p.drift = v.get<double>();
      else if (k == "bias") p.bias = v.get<double>();
      else if (k == "root_quality") p.root_quality = v.get<double>();
      else if (k == "seed") p.seed = v.get<std::uint64_t>();
      else if (k == "zero_noise") p.zero_noise = v.get<bool>();
      else if (k == "semantic") p.semantic = v.get<bool>();
      else if (k == "update_tasks") p.update_tasks = v.get<int>();
      else if (k == "retrieve_tasks") p.retrieve_tasks = v.get<int>();
      else throw ConfigError(field, "unknown field");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(field, std::string("wrong type: ") + e.what());
    }
  }
  p.validate();
  return p;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

double unit_from(std::uint64_t k) { return static_cast<double>(k >> 11) * 0x1.0p-53; }

Landscape::Landscape(LandscapeParams params) : params_(params) { params_.validate(); }

void Landscape::register_candidate(const std::string& candidate_id, double quality) {
  std::lock_guard lock(mutex_);
  quality_[candidate_id] = clamp01(quality);
}

bool Landscape::contains(const std::string& candidate_id) const {
  std::lock_guard lock(mutex_);
  return quality_.contains(candidate_id);
}

double Landscape::quality(const std::string& candidate_id) const {
  std::lock_guard lock(mutex_);
  auto it = quality_.find(candidate_id);
  if (it == quality_.end()) throw Error("candidate '" + candidate_id + "' is not registered in the landscape");
  return it->second;
}

double Landscape::probability_for_quality(double q) const { return clamp01(params_.base_rate + q * params_.gain); }

double Landscape::success_probability(const std::string& candidate_id) const {
  return probability_for_quality(quality(candidate_id));
}

double Landscape::child_quality(double parent_quality, const std::string& child_id) const {
  const double u = 2.0 * unit_from(key(params_.seed, {0x6b65726e656cULL, hash_string(child_id)})) - 1.0;
  return clamp01(parent_quality + params_.drift * u + params_.bias);
}

std::map<std::string, double> Landscape::qualities() const {
  std::lock_guard lock(mutex_);
  return quality_;
}

SimTasks make_tasks(const LandscapeParams& params) {
  SimTasks tasks;
  for (int i = 0; i < params.update_tasks; ++i) {
    EpisodeRecorder e;
    e.task_id = "u" + std::to_string(i);
    e.init.task_text = "find the " + indexed(kNouns[static_cast<std::size_t>(i) % kNouns.size()], i, kNouns.size()) +
                       " on " + indexed(kSites[static_cast<std::size_t>(i) % kSites.size()], i, kSites.size());
    tasks.update_tasks.push_back(std::move(e));
  }
  for (int j = 0; j < params.retrieve_tasks; ++j) {
    const int i = j % params.update_tasks;
    EpisodeRecorder e;
    e.task_id = "r" + std::to_string(j);
    e.init.task_text = "compare " + indexed(kNouns[static_cast<std::size_t>(i) % kNouns.size()], i, kNouns.size()) +
                       " prices at " +
                       indexed(kSites[static_cast<std::size_t>(i) % kSites.size()], i, kSites.size());
    e.init.metadata = Json{{"match", "u" + std::to_string(i)}};
    tasks.retrieve_tasks.push_back(std::move(e));
  }
  return tasks;
}

SimRunner::SimRunner(const Landscape& landscape) : landscape_(landscape) {
  const LandscapeParams& p = landscape_.params();
  std::vector<std::pair<std::uint64_t, std::string>> order;
  for (const auto& t : make_tasks(p).retrieve_tasks)
    order.emplace_back(key(p.seed, {0x7461736bULL, hash_string(t.task_id)}), t.task_id);
  std::sort(order.begin(), order.end());
  const double n = static_cast<double>(order.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    thresholds_[order[rank].second] = (static_cast<double>(rank) + 0.5) / n;
}

TaskOutcome SimRunner::run(const TaskContext& context, const EpisodeRecorder& task, const TruncatedPayload* payload) {
  const LandscapeParams& p = landscape_.params();
  const std::uint64_t task_key = hash_string(task.task_id);
  double probability = p.base_rate;
  double u = 0.0;
  if (!payload) {
    u = unit_from(key(p.seed, {0x757064617465ULL, task_key}));
  } else {
    ++deliveries_;
    if (p.semantic) {
      const std::string match = task.init.metadata.value("match", std::string{});
      const auto tokens = reference::tokenize(payload->text);
      const bool hit = !match.empty() && std::find(tokens.begin(), tokens.end(), match) != tokens.end();
      // Still validates that the candidate is known.
      (void)landscape_.quality(context.candidate_id);
      probability = clamp01(p.base_rate + (hit ? p.gain : 0.0));
    } else {
      probability = landscape_.success_probability(context.candidate_id);
    }
    if (auto it = thresholds_.find(task.task_id); p.zero_noise && it != thresholds_.end()) {
      u = it->second;
    } else if (p.zero_noise) {
      u = unit_from(key(p.seed, {0x7461736bULL, task_key}));
    } else {
      u = unit_from(key(p.seed, {hash_string(context.candidate_id), static_cast<std::uint64_t>(context.evaluation_index),
                                 task_key}));
    }
  }
  const double reward = u < probability ? 1.0 : 0.0;

  TaskOutcome outcome;
  outcome.task_id = task.task_id;
  outcome.reward = reward;
  outcome.status = OutcomeStatus::completed;
  outcome.evidence = task.partial_view();
  StepRecord step;
  step.index = 0;
  step.action_text = "attempt: " + task.init.task_text;
  step.observation_text = reward > 0.5 ? "task completed" : "task failed";
  outcome.evidence.steps.push_back(std::move(step));
  if (payload) outcome.evidence.memory_retrieved = payload->payload;
  outcome.evidence.reward = reward;
  return outcome;
}

ProgramRef sim_program(const LandscapeParams& params) {
  return ProgramRef{{params.semantic ? "builtin:keyword" : "builtin:empty"}, ""};
}

CandidateArtifact sim_root(const LandscapeParams& params) {
  CandidateArtifact root;
  root.candidate_id = "root";
  root.program = sim_program(params);
  return root;
}

CandidateArtifact SimMutator::mutate(const CandidateArtifact& parent, const ReflectionFeedback&,
                                     const MutationContext& context) {
  const double q = landscape_.child_quality(landscape_.quality(parent.candidate_id), context.candidate_id);
  landscape_.register_candidate(context.candidate_id, q);
  CandidateArtifact child;
  child.candidate_id = context.candidate_id;
  child.parent_id = parent.candidate_id;
  child.created_round = context.round;
  child.program = plan_.fail_rounds.contains(context.round) ? ProgramRef{{"builtin:bad-schema"}, ""}
                                                            : sim_program(landscape_.params());
  return child;
}

CandidateArtifact SimRepairer::repair(const CandidateArtifact& broken, const QuickExamReport&,
                                      const MutationContext& context) {
  landscape_.register_candidate(context.candidate_id, landscape_.quality(broken.candidate_id));
  CandidateArtifact fixed = broken;
  fixed.candidate_id = context.candidate_id;
  fixed.exam_report = {};
  if (plan_.repair_fixes) fixed.program = sim_program(landscape_.params());
  return fixed;
}

RegretReport regret_report(const GenerationTree& tree, NodeId selected, const Landscape& landscape) {
  RegretReport r;
  r.selected_quality = landscape.quality(tree.node(selected).candidate.candidate_id);
  r.best_quality = -1.0;
  double sum = 0.0;
  for (const auto& node : tree.nodes()) {
    const double q = landscape.quality(node.candidate.candidate_id);
    r.best_quality = std::max(r.best_quality, q);
    sum += q;
    if (q > r.selected_quality) ++r.selected_rank;
  }
  r.candidates = static_cast<int>(tree.size());
  r.mean_quality = sum / static_cast<double>(tree.size());
  return r;
}

Json to_json(const RegretReport& r) {
  return Json{{"best_quality", r.best_quality},
              {"selected_quality", r.selected_quality},
              {"mean_quality", r.mean_quality},
              {"selected_rank", r.selected_rank},
              {"candidates", r.candidates}};
}

std::vector<double> best_so_far(const GenerationTree& tree) {
  // Replays the round log with the same running-mean update as the tree.
  std::map<NodeId, TreeNode> stats;
  stats[NodeId::root()].mean_score = tree.root().first_score;
  stats[NodeId::root()].eval_count = 1;
  auto best = [&] {
    double b = 0.0;
    for (const auto& [id, node] : stats) b = std::max(b, node.mean_score);
    return b;
  };
  std::vector<double> curve{best()};
  for (const auto& r : tree.round_log()) {
    if (r.action == RoundAction::evaluate && r.score) {
      policy::update_node_score(stats.at(r.target), *r.score);
    } else if (r.action == RoundAction::generate && r.result_node && r.score) {
      stats[*r.result_node].mean_score = *r.score;
      stats[*r.result_node].eval_count = 1;
    }
    curve.push_back(best());
  }
  return curve;
}

namespace {

SessionOptions sim_session(const SearchConfig& config) {
  SessionOptions session;
  session.call_timeout = config.per_call_timeout;
  return session;
}

// Child ids carry a "-r<k>" suffix per repair; the quality was drawn for
// the generation's base id.
std::string base_child_id(const std::string& id) {
  auto pos = id.find("-r");
  return pos == std::string::npos ? id : id.substr(0, pos);
}

EvalBatches collect_batches(SimRunner& runner, const LandscapeParams& params) {
  SimTasks tasks = make_tasks(params);
  UpdateBatchCollector collector;
  EvalBatches batches{collector.collect(runner, tasks.update_tasks), std::move(tasks.retrieve_tasks)};
  batches.validate();
  return batches;
}

}  // namespace

SimWorld::SimWorld(const SearchConfig& config, const LandscapeParams& params, const FailurePlan& plan)
    : landscape_(params),
      runner_(landscape_),
      evaluator_(collect_batches(runner_, params), runner_, config, sim_session(config)),
      examiner_(make_exam_inputs(evaluator_.batches(), config, sim_session(config))),
      mutator_(landscape_, plan),
      repairer_(landscape_, plan),
      generator_(reflector_, mutator_, repairer_, examiner_, config) {
  landscape_.register_candidate(root().candidate_id, params.root_quality);
}

void SimWorld::restore(const GenerationTree& tree) {
  for (const auto& node : tree.nodes()) {
    if (!node.parent) continue;
    const std::string& id = node.candidate.candidate_id;
    const double parent_q = landscape_.quality(tree.node(*node.parent).candidate.candidate_id);
    landscape_.register_candidate(id, landscape_.child_quality(parent_q, base_child_id(id)));
  }
}

EvalBatches sim_batches(const LandscapeParams& params) {
  params.validate();
  Landscape landscape(params);
  SimRunner runner(landscape);
  return collect_batches(runner, params);
}

SimRunResult run_sim_search(const SearchConfig& config, const LandscapeParams& params, const FailurePlan& plan,
                            JournalSink& journal) {
  SimWorld world(config, params, plan);
  SimRunResult result{run_search(config, world.root(), world.evaluator(), world.generator(), journal), {}, {},
                      world.batches()};
  result.regret = regret_report(result.outcome.tree, result.outcome.selected, world.landscape());
  result.curve = best_so_far(result.outcome.tree);
  return result;
}

Json run_sim_batch(const SearchConfig& config, const LandscapeParams& params, std::uint64_t first_seed, int count) {
  Json runs = Json::array();
  int wins = 0;
  int monotone = 0;
  double selected_sum = 0.0;
  double mean_sum = 0.0;
  double best_sum = 0.0;
  for (int i = 0; i < count; ++i) {
    SearchConfig c = config;
    LandscapeParams p = params;
    c.rng_seed = first_seed + static_cast<std::uint64_t>(i);
    p.seed = c.rng_seed;
    NullJournal journal;
    SimRunResult r = run_sim_search(c, p, {}, journal);
    const bool win = r.regret.selected_quality > r.regret.mean_quality;
    const bool mono = std::is_sorted(r.curve.begin(), r.curve.end());
    wins += win;
    monotone += mono;
    selected_sum += r.regret.selected_quality;
    mean_sum += r.regret.mean_quality;
    best_sum += r.regret.best_quality;
    Json run = to_json(r.regret);
    run["seed"] = c.rng_seed;
    run["selected_node"] = r.outcome.selected.value;
    run["total_evals"] = r.outcome.tree.total_evals();
    run["beats_mean"] = win;
    run["best_so_far"] = r.curve;
    runs.push_back(std::move(run));
  }
  const double n = count > 0 ? static_cast<double>(count) : 1.0;
  return Json{{"seeds", count},
              {"first_seed", first_seed},
              {"search", to_json(config)},
              {"landscape", to_json(params)},
              {"beats_mean", wins},
              {"monotone_best_so_far", monotone},
              {"mean_selected_quality", selected_sum / n},
              {"mean_candidate_quality", mean_sum / n},
              {"mean_best_quality", best_sum / n},
              {"runs", runs}};
}

}  // namespace memosearch::sim
