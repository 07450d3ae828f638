#include "memosearch/run.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "memosearch/external.hpp"
#include "memosearch/journal.hpp"
#include "memosearch/log.hpp"
#include "memosearch/policy.hpp"

namespace memosearch::run {
namespace fs = std::filesystem;
namespace {

std::string read_text(const fs::path& path, const std::string& field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(field, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const fs::path& path, const std::string& field) {
  auto text = read_text(path, field);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(field, path.string() + " is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return (base / p).lexically_normal();
}

std::vector<std::string> string_list(const Json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& s : v) {
    if (!s.is_string()) throw ConfigError(field, "expected an array of strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

CommandSpec command_spec_from_json(const Json& j, const std::string& prefix, const fs::path& base) {
  if (!j.is_object()) throw ConfigError(prefix, "expected an object");
  CommandSpec c;
  for (const auto& [k, v] : j.items()) {
    const std::string field = prefix + "." + k;
    if (k == "command") c.command = string_list(v, field);
    else if (k == "working_dir") c.working_dir = resolve(base, v.get<std::string>());
    else if (k == "timeout_ms") {
      if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) throw ConfigError(field, "expected a positive integer");
      c.timeout = std::chrono::milliseconds(v.get<std::int64_t>());
    } else throw ConfigError(field, "unknown key");
  }
  if (c.working_dir.empty()) c.working_dir = base.empty() ? fs::current_path() : base;
  return c;
}

Json to_json(const CommandSpec& c) {
  return Json{{"command", c.command}, {"working_dir", c.working_dir.string()}, {"timeout_ms", c.timeout.count()}};
}

sim::FailurePlan failure_plan_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("failure_plan", "expected an object");
  sim::FailurePlan plan;
  for (const auto& [k, v] : j.items()) {
    if (k == "fail_rounds") {
      if (!v.is_array()) throw ConfigError("failure_plan.fail_rounds", "expected an array of integers");
      for (const auto& r : v) {
        if (!r.is_number_integer()) throw ConfigError("failure_plan.fail_rounds", "expected an array of integers");
        plan.fail_rounds.insert(r.get<int>());
      }
    } else if (k == "repair_fixes") {
      if (!v.is_boolean()) throw ConfigError("failure_plan.repair_fixes", "expected a boolean");
      plan.repair_fixes = v.get<bool>();
    } else {
      throw ConfigError("failure_plan." + k, "unknown key");
    }
  }
  return plan;
}

// Search wiring for one mode. Owns every collaborator of the search loop.
class Wiring {
 public:
  virtual ~Wiring() = default;
  virtual FullEvaluator& evaluator() = 0;
  virtual MutatorPipeline& generator() = 0;
  virtual Examiner& examiner() = 0;
  virtual CandidateArtifact root() = 0;
  virtual void restore(const GenerationTree&) {}
  virtual std::string report(const SearchOutcome&) { return {}; }
};

class SimWiring : public Wiring {
 public:
  explicit SimWiring(const RunConfig& c) : world_(c.search, c.landscape, c.failure_plan) {}
  FullEvaluator& evaluator() override { return world_.evaluator(); }
  MutatorPipeline& generator() override { return world_.generator(); }
  Examiner& examiner() override { return world_.examiner(); }
  CandidateArtifact root() override { return world_.root(); }
  void restore(const GenerationTree& tree) override { world_.restore(tree); }
  std::string report(const SearchOutcome& outcome) override {
    auto r = sim::regret_report(outcome.tree, outcome.selected, world_.landscape());
    std::ostringstream out;
    out << std::fixed << std::setprecision(4) << "latent quality: selected=" << r.selected_quality
        << " best=" << r.best_quality << " mean=" << r.mean_quality << " rank=" << r.selected_rank << "/"
        << r.candidates << "\n";
    return out.str();
  }

 private:
  sim::SimWorld world_;
};

EvalBatches load_batches(const fs::path& path) {
  auto j = read_json(path, "batches");
  EvalBatches b;
  try {
    b = eval_batches_from_json(j);
  } catch (const SchemaError& e) {
    throw ConfigError("batches", e.what());
  }
  try {
    b.validate();
  } catch (const SchemaError& e) {
    throw ConfigError("batches", e.what());
  }
  return b;
}

SessionOptions session_options(const RunConfig& c) {
  SessionOptions s;
  s.call_timeout = c.search.per_call_timeout;
  s.artifact_root = c.artifact_root.empty() ? fs::current_path() : c.artifact_root;
  return s;
}

// External and llm modes: candidates are real programs, tasks go through a
// runner command, and the meta agent is a command or a chat endpoint.
class ProgramWiring : public Wiring {
 public:
  ProgramWiring(const RunConfig& c, CandidateStore& store) : config_(c), store_(store) {
    auto batches = load_batches(c.batches);
    runner_ = std::make_unique<ExternalTaskRunner>(c.runner.command, c.runner.working_dir, c.runner.timeout);
    examiner_ = std::make_unique<QuickExaminer>(make_exam_inputs(batches, c.search, session_options(c)));
    evaluator_ = std::make_unique<HarnessEvaluator>(std::move(batches), *runner_, c.search, session_options(c));
    if (c.mode == "llm") {
      chat_ = std::make_unique<llm::HttpChatClient>(*c.endpoint);
      prompts_ = std::make_unique<llm::PromptLibrary>(
          c.endpoint->prompt_dir.empty() ? llm::PromptLibrary::bundled_dir() : c.endpoint->prompt_dir);
      reflector_ = std::make_unique<llm::LlmReflector>(*chat_, *prompts_, *c.endpoint);
      mutator_ = std::make_unique<llm::LlmMutator>(*chat_, *prompts_, *c.endpoint, store, c.candidate_command);
      repairer_ = std::make_unique<llm::LlmRepairer>(*chat_, *prompts_, store, c.candidate_command);
    } else {
      reflector_ = std::make_unique<SummaryReflector>();
      agent_ = std::make_unique<ExternalMetaAgent>(c.meta.command, c.meta.working_dir, c.meta.timeout, store,
                                                       c.candidate_command);
    }
    Mutator& mutator = mutator_ ? *mutator_ : static_cast<Mutator&>(*agent_);
    Repairer& repairer = repairer_ ? *repairer_ : static_cast<Repairer&>(*agent_);
    generator_ = std::make_unique<ReflectiveGenerator>(
        *reflector_, mutator, repairer, *examiner_, c.search,
        [&store](const CandidateArtifact& a) { return candidate_source(store, a); });
  }

  FullEvaluator& evaluator() override { return *evaluator_; }
  MutatorPipeline& generator() override { return *generator_; }
  Examiner& examiner() override { return *examiner_; }

  CandidateArtifact root() override {
    if (!config_.root.source.empty()) {
      return materialize_candidate(store_, config_.candidate_command, "root",
                                   read_text(config_.root.source, "root.source"));
    }
    CandidateArtifact root;
    root.candidate_id = "root";
    root.program = config_.root.program;
    return root;
  }

 private:
  RunConfig config_;
  CandidateStore& store_;
  std::unique_ptr<ExternalTaskRunner> runner_;
  std::unique_ptr<QuickExaminer> examiner_;
  std::unique_ptr<HarnessEvaluator> evaluator_;
  std::unique_ptr<llm::HttpChatClient> chat_;
  std::unique_ptr<llm::PromptLibrary> prompts_;
  std::unique_ptr<Reflector> reflector_;
  std::unique_ptr<Mutator> mutator_;
  std::unique_ptr<Repairer> repairer_;
  std::unique_ptr<ExternalMetaAgent> agent_;
  std::unique_ptr<ReflectiveGenerator> generator_;
};

std::unique_ptr<Wiring> make_wiring(const RunConfig& c, CandidateStore& store) {
  if (c.mode == "sim") return std::make_unique<SimWiring>(c);
  return std::make_unique<ProgramWiring>(c, store);
}

std::string fmt4(double x) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << x;
  return out.str();
}

double node_lcb(const GenerationTree& tree, NodeId id, double confidence) {
  const auto& n = tree.node(id);
  return policy::lcb_eval(n.mean_score, n.eval_count, tree.total_evals(), confidence);
}

std::string summary(const fs::path& run_dir, const SearchOutcome& outcome, const SearchConfig& search,
                    Wiring& wiring) {
  const auto& tree = outcome.tree;
  const auto& sel = tree.node(outcome.selected);
  std::ostringstream out;
  out << "run directory: " << run_dir.string() << "\n";
  out << "rounds: " << tree.rounds_completed() << "  evaluations: " << tree.total_evals()
      << "  nodes: " << tree.size() << "\n";
  out << "selected: node " << outcome.selected.value << " (" << sel.candidate.candidate_id << ")"
      << "  mean=" << fmt4(sel.mean_score) << " n=" << sel.eval_count
      << " lcb=" << fmt4(node_lcb(tree, outcome.selected, search.lcb_confidence())) << "\n";
  out << wiring.report(outcome);
  return out.str();
}

// Everything of a run config that decides results; compared on resume.
Json result_relevant(const RunConfig& c) {
  Json j = to_json(c);
  j.erase("run_dir");
  j.erase("search");
  return j;
}

}  // namespace

void RunConfig::validate() const {
  search.validate();
  if (mode != "sim" && mode != "external" && mode != "llm")
    throw ConfigError("mode", "expected sim, external or llm, got '" + mode + "'");
  if (mode == "sim") {
    landscape.validate();
    return;
  }
  if (batches.empty()) throw ConfigError("batches", "required in " + mode + " mode");
  if (runner.command.empty()) throw ConfigError("runner.command", "required in " + mode + " mode");
  if (root.source.empty() && root.program.command.empty())
    throw ConfigError("root", "needs a command or a source file");
  if (candidate_command.empty()) throw ConfigError("candidate_command", "must not be empty");
  if (mode == "external" && meta.command.empty()) throw ConfigError("meta.command", "required in external mode");
  if (mode == "llm") {
    if (!endpoint) throw ConfigError("endpoint", "required in llm mode");
    endpoint->validate();
  }
}

RunConfig run_config_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  RunConfig c;
  c.runner.working_dir = c.meta.working_dir = base_dir.empty() ? fs::current_path() : base_dir;
  c.artifact_root = base_dir;
  for (const auto& [k, v] : j.items()) {
    try {
      if (k == "mode") c.mode = v.get<std::string>();
      else if (k == "run_dir") c.run_dir = resolve(base_dir, v.get<std::string>());
      else if (k == "search") c.search = search_config_from_json(v, "search");
      else if (k == "landscape") c.landscape = sim::landscape_params_from_json(v, "landscape");
      else if (k == "failure_plan") c.failure_plan = failure_plan_from_json(v);
      else if (k == "batches") c.batches = resolve(base_dir, v.get<std::string>());
      else if (k == "root") {
        if (!v.is_object()) throw ConfigError("root", "expected an object");
        for (const auto& [rk, rv] : v.items()) {
          if (rk == "command") c.root.program.command = string_list(rv, "root.command");
          else if (rk == "working_dir") c.root.program.working_dir = rv.get<std::string>();
          else if (rk == "source") c.root.source = resolve(base_dir, rv.get<std::string>());
          else throw ConfigError("root." + rk, "unknown key");
        }
      } else if (k == "runner") c.runner = command_spec_from_json(v, "runner", base_dir);
      else if (k == "meta") c.meta = command_spec_from_json(v, "meta", base_dir);
      else if (k == "endpoint") {
        auto e = v;
        if (e.contains("prompt_dir")) e["prompt_dir"] = resolve(base_dir, e["prompt_dir"].get<std::string>()).string();
        c.endpoint = llm::endpoint_config_from_json(e, "endpoint");
      } else if (k == "candidate_command") c.candidate_command = string_list(v, "candidate_command");
      else if (k == "artifact_root") c.artifact_root = resolve(base_dir, v.get<std::string>());
      else throw ConfigError(k, "unknown key");
    } catch (const Json::exception& e) {
      throw ConfigError(k, std::string("wrong type: ") + e.what());
    }
  }
  c.validate();
  return c;
}

Json to_json(const RunConfig& c) {
  Json root{{"command", c.root.program.command}};
  if (!c.root.program.working_dir.empty()) root["working_dir"] = c.root.program.working_dir;
  if (!c.root.source.empty()) root["source"] = fs::absolute(c.root.source).string();
  std::vector<int> fail_rounds(c.failure_plan.fail_rounds.begin(), c.failure_plan.fail_rounds.end());
  Json j{{"mode", c.mode},
         {"run_dir", c.run_dir.empty() ? std::string() : fs::absolute(c.run_dir).string()},
         {"search", to_json(c.search)},
         {"landscape", sim::to_json(c.landscape)},
         {"failure_plan", Json{{"fail_rounds", fail_rounds}, {"repair_fixes", c.failure_plan.repair_fixes}}},
         {"batches", c.batches.empty() ? std::string() : fs::absolute(c.batches).string()},
         {"root", root},
         {"runner", to_json(c.runner)},
         {"meta", to_json(c.meta)},
         {"candidate_command", c.candidate_command},
         {"artifact_root", c.artifact_root.empty() ? std::string() : fs::absolute(c.artifact_root).string()}};
  if (c.endpoint) j["endpoint"] = llm::to_json(*c.endpoint);
  return j;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config", "file not found: " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  Json j = read_json(path, "config");
  // Stored configs carry empty strings for unset paths.
  if (j.is_object()) {
    for (const char* key : {"run_dir", "batches", "artifact_root"})
      if (j.contains(key) && j[key] == "") j.erase(key);
    if (j.contains("root") && j["root"].is_object() && j["root"].contains("source") && j["root"]["source"] == "")
      j["root"].erase("source");
  }
  RunConfig c = run_config_from_json(j, base);
  if (c.run_dir.empty()) c.run_dir = base / "runs" / path.stem();
  return c;
}

std::string cmd_search(const fs::path& config_path, const SearchOptions& options) {
  RunConfig c = load_run_config(config_path);
  if (options.mode) c.mode = *options.mode;
  if (options.run_dir) c.run_dir = fs::absolute(*options.run_dir);
  c.validate();

  RunLayout layout{c.run_dir};
  if (fs::exists(layout.journal_file()))
    throw JournalError("run directory " + c.run_dir.string() + " already holds a journal; resume it instead");
  layout.create();
  RunLock lock(layout.lock_file());
  CandidateStore store(layout.candidates_dir());
  auto wiring = make_wiring(c, store);

  CandidateArtifact root = wiring->root();
  root.exam_report = wiring->examiner().examine(root);
  if (!root.exam_report.passed()) throw ExamFailed(root.exam_report);

  const Json stored = to_json(c);
  write_text(layout.config_file(), stored.dump(2) + "\n");
  Journal journal = Journal::create(layout.journal_file());
  journal.append(header_event(stored, c.search, c.mode));
  JournalWriter writer(journal, &store, layout.evidence_dir());
  SearchOutcome outcome = run_search(c.search, root, wiring->evaluator(), wiring->generator(), writer);
  journal.close();
  return summary(c.run_dir, outcome, c.search, *wiring);
}

std::string cmd_resume(const fs::path& run_dir, const std::optional<fs::path>& config_path) {
  RunLayout layout{fs::absolute(run_dir)};
  if (!fs::exists(layout.journal_file()))
    throw CorruptionError("no journal in " + layout.root.string());
  RunLock lock(layout.lock_file());
  ReplayResult replay = replay_journal(layout.journal_file());
  for (const auto& w : replay.warnings) log::warn(w);

  RunConfig c = run_config_from_json(replay.header.at("config"));
  c.search = replay.config;
  c.run_dir = layout.root;
  if (config_path) {
    RunConfig other = load_run_config(*config_path);
    if (other.mode != c.mode) throw ConfigError("mode", "differs from the journal header; refusing to resume");
    if (!other.search.same_search_as(c.search))
      throw ConfigError("search", "settings differ from the journal header; refusing to resume");
    if (result_relevant(other) != result_relevant(c))
      throw ConfigError("config", "run settings differ from the journal header; refusing to resume");
    c.search.eval_concurrency = other.search.eval_concurrency;
    c.search.per_call_timeout = other.search.per_call_timeout;
  }

  CandidateStore store(layout.candidates_dir());
  auto wiring = make_wiring(c, store);
  wiring->restore(replay.state.tree);
  const int done = replay.state.tree.rounds_completed();
  if (done >= c.search.search_steps) {
    SearchOutcome outcome{replay.state.tree, policy::final_selection(replay.state.tree, c.search.lcb_confidence())};
    return "run already complete after " + std::to_string(done) + " rounds; nothing to do\n" +
           summary(c.run_dir, outcome, c.search, *wiring);
  }
  Journal journal = Journal::reopen(layout.journal_file(), replay.committed_bytes, replay.committed_lines);
  if (replay.dropped_lines > 0 || replay.truncated_tail)
    log::warn("dropped " + std::to_string(replay.dropped_lines) + " uncommitted journal lines");
  JournalWriter writer(journal, &store, layout.evidence_dir());
  SearchOutcome outcome =
      continue_search(c.search, std::move(replay.state), wiring->evaluator(), wiring->generator(), writer);
  journal.close();
  return "resumed after round " + std::to_string(done) + "\n" + summary(c.run_dir, outcome, c.search, *wiring);
}

std::string cmd_eval(const EvalOptions& o) {
  if (o.candidate.empty()) throw ConfigError("candidate", "command required");
  if (o.batches.empty()) throw ConfigError("batches", "path required");
  RunConfig c;
  if (o.config) c = load_run_config(*o.config);
  EvalBatches batches = load_batches(o.batches);

  CandidateArtifact candidate;
  candidate.candidate_id = "candidate";
  candidate.program.command = o.candidate;
  SessionOptions session = session_options(c);

  std::unique_ptr<TaskRunner> runner;
  sim::Landscape landscape(c.landscape);
  if (!o.runner.empty()) {
    runner = std::make_unique<ExternalTaskRunner>(o.runner, fs::current_path(), c.runner.timeout);
  } else {
    landscape.register_candidate(candidate.candidate_id, c.landscape.root_quality);
    runner = std::make_unique<sim::SimRunner>(landscape);
  }

  if (o.skip_exam) {
    log::warn("quick exam skipped at the operator's request");
  } else {
    candidate.exam_report = quick_exam(candidate, make_exam_inputs(batches, c.search, session));
    if (!candidate.exam_report.passed()) throw ExamFailed(candidate.exam_report);
  }

  HarnessEvaluator evaluator(std::move(batches), *runner, c.search, session);
  FullEvalResult result = evaluator.evaluate(candidate, 0);
  if (o.json) return to_json(result).dump(2) + "\n";
  std::ostringstream out;
  const auto succeeded = std::count_if(result.outcomes.begin(), result.outcomes.end(), [](const TaskOutcome& t) {
    return t.status == OutcomeStatus::completed && t.reward >= 1.0;
  });
  out << "score: " << fmt4(result.score) << " over " << result.outcomes.size() << " tasks (" << succeeded
      << " succeeded, " << result.outcomes.size() - static_cast<std::size_t>(result.completed_count())
      << " invalid)\n";
  for (const auto& t : result.outcomes)
    out << "  " << t.task_id << "  reward=" << fmt4(t.reward) << "  " << to_string(t.status) << "\n";
  for (const auto& w : result.warnings) out << "warning: " << w << "\n";
  return out.str();
}

TreeFormat tree_format_from_string(const std::string& s) {
  if (s == "text") return TreeFormat::text;
  if (s == "dot") return TreeFormat::dot;
  if (s == "json") return TreeFormat::json;
  throw ConfigError("format", "expected text, dot or json, got '" + s + "'");
}

std::string render_tree(const GenerationTree& tree, const SearchConfig& config, TreeFormat format) {
  const NodeId selected = policy::final_selection(tree, config.lcb_confidence());
  std::ostringstream out;
  auto stats = [&](const TreeNode& n) {
    return "mean=" + fmt4(n.mean_score) + " n=" + std::to_string(n.eval_count) + " K=" +
           std::to_string(n.child_count()) + " S=" + fmt4(n.cumulative_improvement);
  };
  switch (format) {
    case TreeFormat::text: {
      // Depth-first outline in child insertion order.
      std::vector<std::pair<NodeId, int>> stack{{NodeId::root(), 0}};
      while (!stack.empty()) {
        auto [id, depth] = stack.back();
        stack.pop_back();
        const auto& n = tree.node(id);
        out << std::string(2 * depth, ' ') << "node " << id.value << " " << n.candidate.candidate_id << "  "
            << stats(n) << " lcb=" << fmt4(node_lcb(tree, id, config.lcb_confidence()));
        if (id == selected) out << "  [selected]";
        out << "\n";
        for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back({*it, depth + 1});
      }
      break;
    }
    case TreeFormat::dot: {
      out << "digraph search {\n  node [shape=box, fontname=\"monospace\"];\n";
      for (const auto& n : tree.nodes()) {
        out << "  n" << n.id.value << " [label=\"" << n.id.value << " " << n.candidate.candidate_id << "\\n"
            << stats(n) << "\"";
        if (n.id == selected) out << ", penwidth=3, color=\"darkgreen\"";
        out << "];\n";
      }
      for (const auto& n : tree.nodes())
        for (auto child : n.children) out << "  n" << n.id.value << " -> n" << child.value << ";\n";
      out << "}\n";
      break;
    }
    case TreeFormat::json: {
      Json j = to_json(tree);
      j["selected"] = selected.value;
      j["lcb_confidence"] = config.lcb_confidence();
      out << j.dump(2) << "\n";
      break;
    }
  }
  return out.str();
}

std::string cmd_tree(const fs::path& run_dir, TreeFormat format) {
  RunLayout layout{run_dir};
  if (!fs::exists(layout.journal_file())) throw CorruptionError("no journal in " + run_dir.string());
  ReplayResult replay = replay_journal(layout.journal_file());
  for (const auto& w : replay.warnings) log::warn(w);
  return render_tree(replay.state.tree, replay.config, format);
}

std::string cmd_sim_batch(const std::optional<fs::path>& config_path, std::uint64_t first_seed, int count,
                          const std::optional<fs::path>& out) {
  if (count <= 0) throw ConfigError("count", "must be positive");
  RunConfig c;
  if (config_path) c = load_run_config(*config_path);
  c.landscape.validate();
  Json report = sim::run_sim_batch(c.search, c.landscape, first_seed, count);
  if (out) write_text(*out, report.dump(2) + "\n");
  std::ostringstream s;
  s << "seeds: " << count << " from " << first_seed << "\n"
    << "selected beats candidate mean: " << report["beats_mean"].get<int>() << "/" << count << "\n"
    << "monotone best-so-far: " << report["monotone_best_so_far"].get<int>() << "/" << count << "\n"
    << "mean latent quality: selected=" << fmt4(report["mean_selected_quality"].get<double>())
    << " candidates=" << fmt4(report["mean_candidate_quality"].get<double>())
    << " best=" << fmt4(report["mean_best_quality"].get<double>()) << "\n";
  if (out) s << "report: " << out->string() << "\n";
  return s.str();
}

std::string cmd_sim_write_batches(const std::optional<fs::path>& config_path, const fs::path& out) {
  RunConfig c;
  if (config_path) c = load_run_config(*config_path);
  EvalBatches batches = sim::sim_batches(c.landscape);
  write_text(out, to_json(batches).dump(2) + "\n");
  return "wrote " + std::to_string(batches.update_episodes.size()) + " update episodes and " +
         std::to_string(batches.retrieve_tasks.size()) + " retrieve tasks to " + out.string() + "\n";
}

}  // namespace memosearch::run
