#include "memosearch/lifecycle.hpp"

#include <algorithm>

#include "memosearch/digest.hpp"
#include "memosearch/log.hpp"

namespace memosearch {

namespace {

QuickExamReport fresh_report() {
  QuickExamReport report;
  for (const char* name : {kExamHandshake, kExamInterface, kExamUpdate, kExamRetrieve, kExamSchema, kExamBudget}) {
    report.checks.push_back({name, CheckStatus::skipped, ""});
  }
  return report;
}

bool declares(const Json& hello, const char* method) {
  if (!hello.contains("methods") || !hello["methods"].is_array()) return false;
  return std::any_of(hello["methods"].begin(), hello["methods"].end(),
                     [&](const Json& m) { return m.is_string() && m.get<std::string>() == method; });
}

// Partial Fisher-Yates; consumes exactly min(k, n) draws.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, int k, std::mt19937_64& rng) {
  const std::size_t take = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(std::max(k, 0)));
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

TrajectorySample summarize(const TaskOutcome& outcome, const SearchConfig& config) {
  const EpisodeRecorder& e = outcome.evidence;
  TrajectorySample s;
  s.task_id = outcome.task_id;
  s.reward = outcome.reward;
  s.task_text = e.init.task_text;

  std::string obs;
  for (const auto& step : e.steps) {
    obs += "step " + std::to_string(step.index) + ": action: " + step.action_text + "\nobservation: " +
           step.observation_text + "\n";
  }
  s.observation_summary = utf8_prefix(obs, static_cast<std::size_t>(config.meta_observation_chars));

  const auto image_cap = static_cast<std::size_t>(config.meta_images_per_episode);
  for (const auto& img : e.init.images) {
    if (s.images.size() >= image_cap) break;
    s.images.push_back(img);
  }
  for (const auto& step : e.steps) {
    for (const auto& img : step.observation_images) {
      if (s.images.size() >= image_cap) break;
      s.images.push_back(img);
    }
  }

  if (e.memory_retrieved && !e.memory_retrieved->items.empty()) {
    s.memory_text = utf8_prefix(payload_text(*e.memory_retrieved), static_cast<std::size_t>(config.meta_memory_chars));
    const auto memory_cap = static_cast<std::size_t>(config.meta_memory_images);
    for (const auto& item : e.memory_retrieved->items) {
      if (!item.images) continue;
      for (const auto& img : *item.images) {
        if (s.memory_images.size() >= memory_cap) break;
        s.memory_images.push_back(img);
      }
    }
  }
  return s;
}

}  // namespace

ExamInputs make_exam_inputs(const EvalBatches& batches, const SearchConfig& config, const SessionOptions& session) {
  const auto k = static_cast<std::size_t>(config.quick_test_tasks);
  if (batches.retrieve_tasks.size() < k) {
    throw ConfigError("search.quick_test_tasks", "needs " + std::to_string(k) + " retrieve tasks, batches hold " +
                                                     std::to_string(batches.retrieve_tasks.size()));
  }
  ExamInputs inputs;
  inputs.config = config;
  inputs.session = session;
  inputs.sample_tasks.assign(batches.retrieve_tasks.begin(), batches.retrieve_tasks.begin() + static_cast<long>(k));
  const std::size_t u = std::min(k, batches.update_episodes.size());
  inputs.sample_episodes.assign(batches.update_episodes.begin(), batches.update_episodes.begin() + static_cast<long>(u));
  return inputs;
}

QuickExamReport quick_exam(const CandidateArtifact& candidate, const ExamInputs& inputs) {
  QuickExamReport report = fresh_report();
  std::size_t at = 0;
  auto pass = [&](std::string detail) {
    report.checks[at].status = CheckStatus::pass;
    report.checks[at].detail = std::move(detail);
    ++at;
  };
  auto fail = [&](std::string detail) {
    report.checks[at].status = CheckStatus::fail;
    report.checks[at].detail = std::move(detail);
    return report;
  };

  std::unique_ptr<CandidateSession> session;
  try {
    session = start_session(candidate, inputs.session);
  } catch (const SessionError& e) {
    return fail(e.what());
  }
  pass("protocol " + std::to_string(kProtocolVersion));

  const Json hello = session->hello_reply();
  if (!declares(hello, "update") || !declares(hello, "retrieve")) {
    std::string missing;
    if (!declares(hello, "update")) missing += " update";
    if (!declares(hello, "retrieve")) missing += " retrieve";
    return fail("hello reply does not declare:" + missing);
  }
  pass("update and retrieve declared");

  try {
    for (const auto& episode : inputs.sample_episodes) session->update(episode);
    session->freeze();
  } catch (const SessionError& e) {
    return fail(e.what());
  }
  pass(std::to_string(inputs.sample_episodes.size()) + " updates and freeze acknowledged");

  std::vector<std::pair<std::string, Json>> raw;
  try {
    for (const auto& task : inputs.sample_tasks) raw.emplace_back(task.task_id, session->retrieve(task));
  } catch (const SessionError& e) {
    return fail(e.what());
  }
  pass(std::to_string(raw.size()) + " retrieves answered");

  std::vector<std::pair<std::string, RetrievedMemoryPayload>> payloads;
  for (const auto& [task_id, json] : raw) {
    try {
      payloads.emplace_back(task_id, validate_payload(json));
    } catch (const SchemaError& e) {
      return fail("task " + task_id + ": " + e.what());
    }
  }
  pass(std::to_string(payloads.size()) + " payloads valid");

  const auto char_budget = static_cast<std::size_t>(inputs.config.payload_char_budget);
  const auto image_budget = static_cast<std::size_t>(inputs.config.payload_image_budget);
  int cut = 0;
  for (const auto& [task_id, payload] : payloads) {
    if (payload.image_count() > image_budget) {
      return fail("task " + task_id + ": payload emits " + std::to_string(payload.image_count()) +
                  " images, budget is " + std::to_string(image_budget));
    }
    const TruncatedPayload t = truncate_payload(payload, inputs.config.payload_char_budget,
                                                inputs.config.payload_image_budget);
    if (utf8_length(t.text) > char_budget) {
      return fail("task " + task_id + ": truncated text still exceeds " + std::to_string(char_budget) + " chars");
    }
    cut += t.report.cut_chars;
  }
  pass("within budgets (" + std::to_string(cut) + " chars cut)");

  try {
    session->shutdown();
  } catch (const Error& e) {
    log::warn("candidate " + candidate.candidate_id + " did not shut down cleanly: " + e.what());
  }
  return report;
}

std::string child_candidate_id(int round) { return "g" + std::to_string(round); }

std::string repair_candidate_id(const std::string& child_id, int attempt) {
  return child_id + "-r" + std::to_string(attempt);
}

RepairOutcome mutate_and_repair(const CandidateArtifact& parent, const ReflectionFeedback& feedback, Mutator& mutator,
                                Repairer& repairer, int repair_budget, Examiner& examiner,
                                const MutationContext& context) {
  if (repair_budget < 0) throw DomainError("repair budget must be nonnegative");
  const std::string digest = feedback_digest(feedback);

  auto finish = [&](CandidateArtifact c, const std::string& expected_id) {
    if (c.candidate_id != expected_id)
      throw LifecycleError("meta agent returned candidate '" + c.candidate_id + "', expected '" + expected_id + "'");
    c.parent_id = parent.candidate_id;
    c.feedback_digest = digest;
    c.created_round = context.round;
    return c;
  };

  RepairOutcome out;
  CandidateArtifact current;
  try {
    current = finish(mutator.mutate(parent, feedback, context), context.candidate_id);
  } catch (const LifecycleError&) {
    throw;
  } catch (const Error& e) {
    throw LifecycleError(std::string("mutator failed: ") + e.what());
  }

  for (int attempt = 0;; ++attempt) {
    current.exam_report = examiner.examine(current);
    ++out.exams;
    out.attempts.push_back(current);
    if (current.exam_report.passed()) {
      out.accepted = current;
      break;
    }
    if (attempt == repair_budget) break;
    MutationContext repair_context{context.round, repair_candidate_id(context.candidate_id, attempt + 1),
                                   context.parent_score};
    try {
      current = finish(repairer.repair(current, current.exam_report, repair_context), repair_context.candidate_id);
    } catch (const LifecycleError&) {
      throw;
    } catch (const Error& e) {
      throw LifecycleError(std::string("repairer failed: ") + e.what());
    }
    ++out.repairs;
  }
  out.last = current;
  out.final_report = current.exam_report;
  return out;
}

EvidenceBundle sample_evidence(const CandidateArtifact& parent, int eval_count, const FullEvalResult& result,
                               const SearchConfig& config, std::mt19937_64& rng, std::string parent_source) {
  std::vector<const TaskOutcome*> successes;
  std::vector<const TaskOutcome*> failures;
  for (const auto& o : result.outcomes) {
    if (o.status != OutcomeStatus::completed) continue;
    (o.reward >= kSuccessThreshold ? successes : failures).push_back(&o);
  }
  if (successes.empty() && failures.empty())
    throw LifecycleError("candidate " + parent.candidate_id + " has no completed outcome to reflect on");

  EvidenceBundle bundle;
  bundle.parent = parent;
  bundle.parent_source = std::move(parent_source);
  bundle.score = result.score;
  bundle.eval_count = eval_count;
  for (const auto* o : sample_without_replacement(successes, config.meta_success_samples, rng))
    bundle.successes.push_back(summarize(*o, config));
  for (const auto* o : sample_without_replacement(failures, config.meta_failure_samples, rng))
    bundle.failures.push_back(summarize(*o, config));
  return bundle;
}

ReflectionFeedback build_feedback(const CandidateArtifact& parent, int eval_count, const FullEvalResult& result,
                                  const SearchConfig& config, std::mt19937_64& rng, Reflector& reflector,
                                  std::string parent_source) {
  EvidenceBundle bundle = sample_evidence(parent, eval_count, result, config, rng, std::move(parent_source));
  ReflectionFeedback feedback;
  try {
    feedback = reflector.reflect(bundle);
  } catch (const LifecycleError&) {
    throw;
  } catch (const Error& e) {
    throw LifecycleError(std::string("reflector failed: ") + e.what());
  }
  if (feedback.sampled_tasks.empty()) {
    for (const auto& s : bundle.successes) feedback.sampled_tasks.push_back(s.task_id);
    for (const auto& s : bundle.failures) feedback.sampled_tasks.push_back(s.task_id);
  }
  return feedback;
}

ReflectiveGenerator::ReflectiveGenerator(Reflector& reflector, Mutator& mutator, Repairer& repairer,
                                         Examiner& examiner, SearchConfig config, SourceLookup source_lookup)
    : reflector_(reflector),
      mutator_(mutator),
      repairer_(repairer),
      examiner_(examiner),
      config_(config),
      source_lookup_(std::move(source_lookup)) {}

GenerationResult ReflectiveGenerator::generate(const GenerationRequest& request) {
  const TreeNode& parent = request.tree.node(request.parent);
  if (!request.parent_result)
    throw LifecycleError("no evaluation evidence for node " + to_string(request.parent));
  std::string source = source_lookup_ ? source_lookup_(parent.candidate) : std::string{};
  GenerationResult result;
  result.feedback = build_feedback(parent.candidate, parent.eval_count, *request.parent_result, config_, request.rng,
                                   reflector_, std::move(source));
  RepairOutcome repaired = mutate_and_repair(parent.candidate, *result.feedback, mutator_, repairer_,
                                             config_.repair_budget, examiner_,
                                             MutationContext{request.round, child_candidate_id(request.round), parent.mean_score});
  result.child = std::move(repaired.accepted);
  result.attempts = std::move(repaired.attempts);
  result.final_report = std::move(repaired.final_report);
  result.exams = repaired.exams;
  return result;
}

ReflectionFeedback SummaryReflector::reflect(const EvidenceBundle& evidence) {
  ReflectionFeedback f;
  f.diagnosis = "candidate " + evidence.parent.candidate_id + " scored " + std::to_string(evidence.score) + " over " +
                std::to_string(evidence.eval_count) + " evaluations; " + std::to_string(evidence.successes.size()) +
                " successes and " + std::to_string(evidence.failures.size()) + " failures sampled";
  for (const auto* group : {&evidence.successes, &evidence.failures}) {
    for (const auto& s : *group) {
      f.sampled_tasks.push_back(s.task_id);
      f.assessments.push_back({s.memory_text.empty() ? PayloadLabel::empty_bad_format : PayloadLabel::potentially_useful,
                               "task " + s.task_id});
    }
  }
  f.suggested_changes.push_back({Priority::high, "store outcome summaries keyed by task keywords",
                                 "retrieved memory did not reference similar past tasks"});
  return f;
}

const char* to_string(PayloadLabel label) {
  switch (label) {
    case PayloadLabel::useful: return "Useful";
    case PayloadLabel::potentially_useful: return "Potentially Useful";
    case PayloadLabel::irrelevant: return "Irrelevant";
    case PayloadLabel::empty_bad_format: return "Empty/BadFormat";
  }
  return "Irrelevant";
}

PayloadLabel payload_label_from_string(const std::string& s) {
  for (auto l : {PayloadLabel::useful, PayloadLabel::potentially_useful, PayloadLabel::irrelevant,
                 PayloadLabel::empty_bad_format}) {
    if (s == to_string(l)) return l;
  }
  throw SchemaError("/label", "label '" + s + "' is not one of Useful, Potentially Useful, Irrelevant, Empty/BadFormat");
}

const char* to_string(Priority priority) {
  switch (priority) {
    case Priority::high: return "High";
    case Priority::medium: return "Medium";
    case Priority::low: return "Low";
  }
  return "Medium";
}

Priority priority_from_string(const std::string& s) {
  for (auto p : {Priority::high, Priority::medium, Priority::low}) {
    if (s == to_string(p)) return p;
  }
  throw SchemaError("/priority", "priority '" + s + "' is not one of High, Medium, Low");
}

Json to_json(const ReflectionFeedback& f) {
  Json assessments = Json::array();
  for (const auto& a : f.assessments) assessments.push_back(Json{{"label", to_string(a.label)}, {"note", a.note}});
  Json changes = Json::array();
  for (const auto& c : f.suggested_changes)
    changes.push_back(Json{{"priority", to_string(c.priority)}, {"what", c.what}, {"why", c.why}});
  return Json{{"diagnosis", f.diagnosis},
              {"assessments", assessments},
              {"suggested_changes", changes},
              {"sampled_tasks", f.sampled_tasks}};
}

ReflectionFeedback feedback_from_json(const Json& j) {
  ReflectionFeedback f;
  f.diagnosis = j.value("diagnosis", std::string{});
  if (j.contains("assessments")) {
    for (const auto& a : j["assessments"])
      f.assessments.push_back({payload_label_from_string(a.at("label").get<std::string>()), a.value("note", "")});
  }
  if (j.contains("suggested_changes")) {
    for (const auto& c : j["suggested_changes"])
      f.suggested_changes.push_back({priority_from_string(c.at("priority").get<std::string>()),
                                     c.value("what", ""), c.value("why", "")});
  }
  if (j.contains("sampled_tasks")) f.sampled_tasks = j["sampled_tasks"].get<std::vector<std::string>>();
  return f;
}

std::string feedback_digest(const ReflectionFeedback& feedback) { return sha256_hex(to_json(feedback).dump()); }

Json to_json(const TrajectorySample& s) {
  Json images = Json::array();
  for (const auto& i : s.images) images.push_back(to_json(i));
  Json memory_images = Json::array();
  for (const auto& i : s.memory_images) memory_images.push_back(to_json(i));
  return Json{{"task_id", s.task_id},
              {"reward", s.reward},
              {"task_text", s.task_text},
              {"observation_summary", s.observation_summary},
              {"images", images},
              {"memory_text", s.memory_text},
              {"memory_images", memory_images}};
}

Json to_json(const EvidenceBundle& b) {
  Json successes = Json::array();
  for (const auto& s : b.successes) successes.push_back(to_json(s));
  Json failures = Json::array();
  for (const auto& s : b.failures) failures.push_back(to_json(s));
  return Json{{"parent", b.parent.candidate_id}, {"score", b.score},         {"eval_count", b.eval_count},
              {"successes", successes},          {"failures", failures}};
}

}  // namespace memosearch
