#include "memosearch/harness.hpp"

#include <atomic>
#include <exception>
#include <set>
#include <thread>

#include "memosearch/log.hpp"
#include "memosearch/subprocess.hpp"

namespace memosearch {

namespace {

// One attempt plus one retry; a second failure marks the task invalid.
TaskOutcome run_with_retry(TaskRunner& runner, TaskContext context, const EpisodeRecorder& task,
                           const TruncatedPayload* payload) {
  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    context.attempt = attempt;
    try {
      TaskOutcome outcome = runner.run(context, task, payload);
      if (outcome.status == OutcomeStatus::completed) {
        if (!(outcome.reward >= 0.0 && outcome.reward <= 1.0))
          throw InfrastructureError("runner returned reward outside [0, 1] for task " + task.task_id);
        outcome.task_id = task.task_id;
        return outcome;
      }
      last_error = "runner reported infrastructure_invalid";
    } catch (const InfrastructureError& e) {
      last_error = e.what();
    }
  }
  TaskOutcome invalid;
  invalid.task_id = task.task_id;
  invalid.status = OutcomeStatus::infrastructure_invalid;
  invalid.evidence = task;
  invalid.evidence.messages.push_back({"system", "infrastructure failure: " + last_error});
  return invalid;
}

}  // namespace

void EvalBatches::validate() const {
  std::set<std::string> update_ids;
  for (std::size_t i = 0; i < update_episodes.size(); ++i) {
    const auto& e = update_episodes[i];
    if (!e.finished()) throw SchemaError("/update_episodes/" + std::to_string(i), "update episode has no reward");
    update_ids.insert(e.task_id);
  }
  std::set<std::string> retrieve_ids;
  for (std::size_t i = 0; i < retrieve_tasks.size(); ++i) {
    const auto& t = retrieve_tasks[i];
    const std::string path = "/retrieve_tasks/" + std::to_string(i);
    if (!t.is_partial()) throw SchemaError(path, "retrieve task must be a partial recorder");
    if (t.init.task_text.empty()) throw SchemaError(path + "/init/task_text", "retrieve task needs task text");
    if (update_ids.contains(t.task_id)) throw SchemaError(path + "/task_id", "task " + t.task_id + " is also an update episode");
    if (!retrieve_ids.insert(t.task_id).second) throw SchemaError(path + "/task_id", "duplicate task id " + t.task_id);
  }
}

int FullEvalResult::completed_count() const {
  int n = 0;
  for (const auto& o : outcomes) n += o.status == OutcomeStatus::completed;
  return n;
}

double score_of(const std::vector<TaskOutcome>& outcomes) {
  double sum = 0.0;
  int count = 0;
  for (const auto& o : outcomes) {
    if (o.status != OutcomeStatus::completed) continue;
    sum += o.reward;
    ++count;
  }
  if (count == 0) throw EvaluationVoid("no completed task outcomes; the evaluation must be rerun");
  return sum / count;
}

FullEvalResult full_eval(CandidateSession& session, const EvalBatches& batches, TaskRunner& runner,
                         const SearchConfig& config, int evaluation_index) {
  if (session.state() != SessionState::updating)
    throw StateError("full evaluation needs a freshly started session, got state " +
                     std::string(to_string(session.state())));
  FullEvalResult result;
  result.candidate_id = session.candidate_id();

  try {
    for (const auto& episode : batches.update_episodes) session.update(episode);
    session.freeze();
  } catch (const SessionError& e) {
    throw CandidateEvaluationError("candidate " + session.candidate_id() + " failed while building memory: " + e.what());
  }

  const std::size_t task_count = batches.retrieve_tasks.size();
  std::vector<TruncatedPayload> delivered(task_count);
  for (std::size_t i = 0; i < task_count; ++i) {
    const auto& task = batches.retrieve_tasks[i];
    RetrievedMemoryPayload payload;
    try {
      payload = validate_payload(session.retrieve(task.partial_view()));
    } catch (const Error& e) {
      const std::string warning = "task " + task.task_id + ": retrieve failed, using empty payload: " + e.what();
      log::warn(warning);
      result.warnings.push_back(warning);
      payload = empty_payload();
    }
    delivered[i] = truncate_payload(payload, config.payload_char_budget, config.payload_image_budget);
  }

  std::vector<TaskOutcome> outcomes(task_count);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < task_count; i = next++) {
      try {
        TaskContext ctx{session.candidate_id(), evaluation_index, 0};
        outcomes[i] = run_with_retry(runner, ctx, batches.retrieve_tasks[i], &delivered[i]);
        if (!outcomes[i].evidence.memory_retrieved) outcomes[i].evidence.memory_retrieved = delivered[i].payload;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = task_count;
      }
    }
  };
  const std::size_t width = std::min<std::size_t>(static_cast<std::size_t>(std::max(config.eval_concurrency, 1)), task_count);
  if (width <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < width; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  for (std::size_t i = 0; i < task_count; ++i) {
    if (outcomes[i].status == OutcomeStatus::infrastructure_invalid) {
      result.warnings.push_back("task " + outcomes[i].task_id + " excluded: infrastructure_invalid");
    }
    result.payloads.emplace(batches.retrieve_tasks[i].task_id, std::move(delivered[i]));
  }
  result.outcomes = std::move(outcomes);
  result.score = score_of(result.outcomes);
  return result;
}

std::vector<EpisodeRecorder> UpdateBatchCollector::collect(TaskRunner& runner, const std::vector<EpisodeRecorder>& tasks) {
  std::lock_guard lock(mutex_);
  std::vector<EpisodeRecorder> out;
  for (const auto& task : tasks) {
    auto it = cache_.find(task.task_id);
    if (it == cache_.end()) {
      ++runs_;
      TaskOutcome outcome = run_with_retry(runner, TaskContext{"", -1, 0}, task.partial_view(), nullptr);
      if (outcome.status != OutcomeStatus::completed) {
        log::warn("dropping update task " + task.task_id + " after repeated infrastructure failure");
        continue;
      }
      EpisodeRecorder finished = outcome.evidence;
      finished.task_id = task.task_id;
      finished.reward = outcome.reward;
      finished.memory_retrieved.reset();
      it = cache_.emplace(task.task_id, std::move(finished)).first;
    }
    out.push_back(it->second);
  }
  return out;
}

HarnessEvaluator::HarnessEvaluator(EvalBatches batches, TaskRunner& runner, SearchConfig config,
                                   SessionOptions session_options)
    : batches_(std::move(batches)), runner_(runner), config_(config), session_options_(std::move(session_options)) {}

FullEvalResult HarnessEvaluator::evaluate(const CandidateArtifact& candidate, int evaluation_index) {
  std::unique_ptr<CandidateSession> session;
  try {
    session = start_session(candidate, session_options_);
  } catch (const SessionError& e) {
    throw CandidateEvaluationError(std::string("cannot start candidate: ") + e.what());
  }
  FullEvalResult result = full_eval(*session, batches_, runner_, config_, evaluation_index);
  session->shutdown();
  return result;
}

ExternalTaskRunner::ExternalTaskRunner(std::vector<std::string> command, std::filesystem::path working_dir,
                                       std::chrono::milliseconds timeout)
    : command_(std::move(command)), working_dir_(std::move(working_dir)), timeout_(timeout) {}

TaskOutcome ExternalTaskRunner::run(const TaskContext& context, const EpisodeRecorder& task,
                                    const TruncatedPayload* payload) {
  Json input;
  input["task"] = to_json(task.partial_view());
  input["payload"] = payload ? to_json(payload->payload) : Json(nullptr);
  input["payload_text"] = payload ? Json(payload->text) : Json(nullptr);
  input["context"] = Json{{"candidate_id", context.candidate_id},
                          {"evaluation_index", context.evaluation_index},
                          {"attempt", context.attempt}};
  const auto deadline = Subprocess::Clock::now() + timeout_;
  try {
    Subprocess proc = Subprocess::spawn(command_, working_dir_);
    if (!proc.write_all(input.dump() + "\n", deadline)) throw InfrastructureError("runner did not read its input");
    proc.close_stdin();
    auto out = proc.read_to_eof(deadline);
    if (!out) throw InfrastructureError("runner timed out on task " + task.task_id);
    auto code = proc.wait(deadline);
    if (!code || *code != 0)
      throw InfrastructureError("runner exited with status " + (code ? std::to_string(*code) : std::string("?")) +
                                " on task " + task.task_id + ": " + proc.stderr_tail());
    Json reply = Json::parse(*out);
    TaskOutcome outcome;
    outcome.task_id = task.task_id;
    outcome.status = reply.value("status", std::string("completed")) == "infrastructure_invalid"
                         ? OutcomeStatus::infrastructure_invalid
                         : OutcomeStatus::completed;
    outcome.reward = reply.value("reward", 0.0);
    if (reply.contains("evidence") && !reply["evidence"].is_null()) {
      outcome.evidence = episode_from_json(reply["evidence"]);
    } else {
      outcome.evidence = task.partial_view();
    }
    outcome.evidence.task_id = task.task_id;
    if (outcome.status == OutcomeStatus::completed) outcome.evidence.reward = outcome.reward;
    return outcome;
  } catch (const nlohmann::json::exception& e) {
    throw InfrastructureError(std::string("runner produced malformed output: ") + e.what());
  } catch (const SchemaError& e) {
    throw InfrastructureError(std::string("runner produced malformed evidence: ") + e.what());
  } catch (const SessionError& e) {
    throw InfrastructureError(e.what());
  }
}

const char* to_string(OutcomeStatus status) {
  return status == OutcomeStatus::completed ? "completed" : "infrastructure_invalid";
}

Json to_json(const TaskOutcome& o, bool with_evidence) {
  Json j{{"task_id", o.task_id}, {"reward", o.reward}, {"status", to_string(o.status)}};
  if (with_evidence) j["evidence"] = to_json(o.evidence);
  return j;
}

TaskOutcome task_outcome_from_json(const Json& j) {
  TaskOutcome o;
  o.task_id = j.at("task_id").get<std::string>();
  o.reward = j.at("reward").get<double>();
  o.status = j.at("status").get<std::string>() == "completed" ? OutcomeStatus::completed
                                                               : OutcomeStatus::infrastructure_invalid;
  if (j.contains("evidence")) o.evidence = episode_from_json(j["evidence"]);
  return o;
}

Json to_json(const FullEvalResult& r, bool with_evidence) {
  Json outcomes = Json::array();
  for (const auto& o : r.outcomes) outcomes.push_back(to_json(o, with_evidence));
  Json payloads = Json::object();
  for (const auto& [task, p] : r.payloads) {
    Json entry{{"report", to_json(p.report)}};
    if (with_evidence) {
      entry["payload"] = to_json(p.payload);
      entry["text"] = p.text;
    }
    payloads[task] = entry;
  }
  return Json{{"candidate_id", r.candidate_id}, {"score", r.score},     {"outcomes", outcomes},
              {"payloads", payloads},           {"warnings", r.warnings}};
}

FullEvalResult full_eval_result_from_json(const Json& j) {
  FullEvalResult r;
  r.candidate_id = j.at("candidate_id").get<std::string>();
  r.score = j.at("score").get<double>();
  for (const auto& o : j.at("outcomes")) r.outcomes.push_back(task_outcome_from_json(o));
  if (j.contains("payloads")) {
    for (const auto& [task, entry] : j["payloads"].items()) {
      TruncatedPayload p;
      if (entry.contains("payload")) p.payload = validate_payload(entry["payload"]);
      p.text = entry.value("text", std::string{});
      p.report.dropped_images = entry.at("report").value("dropped_images", 0);
      p.report.cut_chars = entry.at("report").value("cut_chars", 0);
      r.payloads.emplace(task, std::move(p));
    }
  }
  if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
  return r;
}

Json to_json(const EvalBatches& b) {
  Json u = Json::array();
  for (const auto& e : b.update_episodes) u.push_back(to_json(e));
  Json r = Json::array();
  for (const auto& e : b.retrieve_tasks) r.push_back(to_json(e));
  return Json{{"update_episodes", u}, {"retrieve_tasks", r}};
}

EvalBatches eval_batches_from_json(const Json& j) {
  if (!j.is_object()) throw SchemaError("", "batches must be an object");
  EvalBatches b;
  if (auto it = j.find("update_episodes"); it != j.end()) {
    for (const auto& e : *it) b.update_episodes.push_back(episode_from_json(e));
  }
  auto it = j.find("retrieve_tasks");
  if (it == j.end() || !it->is_array()) throw SchemaError("/retrieve_tasks", "missing retrieve task list");
  for (const auto& e : *it) b.retrieve_tasks.push_back(episode_from_json(e));
  return b;
}

}  // namespace memosearch
