#include "memosearch/external.hpp"

#include "memosearch/subprocess.hpp"

namespace memosearch {

ExternalMetaAgent::ExternalMetaAgent(std::vector<std::string> command, std::filesystem::path working_dir,
                                     std::chrono::milliseconds timeout, CandidateStore& store,
                                     std::vector<std::string> command_template)
    : command_(std::move(command)),
      working_dir_(std::move(working_dir)),
      timeout_(timeout),
      store_(store),
      command_template_(std::move(command_template)) {
  if (command_.empty()) throw ConfigError("meta.command", "must not be empty");
}

std::string ExternalMetaAgent::call(const Json& request) {
  const auto deadline = Subprocess::Clock::now() + timeout_;
  Subprocess proc = Subprocess::spawn(command_, working_dir_);
  if (!proc.write_all(request.dump() + "\n", deadline)) {
    proc.kill();
    throw AdapterError("meta command did not read its request");
  }
  proc.close_stdin();
  auto out = proc.read_to_eof(deadline);
  if (!out) {
    proc.kill();
    throw AdapterError("meta command timed out");
  }
  auto code = proc.wait(deadline);
  if (!code || *code != 0)
    throw AdapterError("meta command exited with status " + (code ? std::to_string(*code) : std::string("?")) +
                       ": " + proc.stderr_tail());
  if (out->empty()) throw AdapterError("meta command produced no program text");
  return *out;
}

CandidateArtifact ExternalMetaAgent::mutate(const CandidateArtifact& parent, const ReflectionFeedback& feedback,
                                            const MutationContext& context) {
  Json request{{"mode", "mutate"},
               {"candidate_id", context.candidate_id},
               {"round", context.round},
               {"parent", to_json(parent)},
               {"parent_score", context.parent_score},
               {"parent_source", candidate_source(store_, parent)},
               {"feedback", to_json(feedback)}};
  auto child = materialize_candidate(store_, command_template_, context.candidate_id, call(request));
  child.parent_id = parent.candidate_id;
  child.created_round = context.round;
  return child;
}

CandidateArtifact ExternalMetaAgent::repair(const CandidateArtifact& broken, const QuickExamReport& report,
                                            const MutationContext& context) {
  Json request{{"mode", "repair"},
               {"candidate_id", context.candidate_id},
               {"round", context.round},
               {"parent", to_json(broken)},
               {"parent_source", candidate_source(store_, broken)},
               {"exam_report", to_json(report)}};
  auto fixed = materialize_candidate(store_, command_template_, context.candidate_id, call(request));
  fixed.parent_id = broken.parent_id;
  fixed.created_round = context.round;
  return fixed;
}

}  // namespace memosearch
