#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "memosearch/journal.hpp"
#include "memosearch/lifecycle.hpp"

namespace memosearch {

// Mutator and repairer backed by a user command. Each call spawns the
// command, writes one JSON request to its stdin and reads the new program
// text from its stdout:
//   {"mode": "mutate" | "repair", "candidate_id", "round", "parent",
//    "parent_source", "feedback" | "exam_report"}
// The text is stored and launched through command_template.
class ExternalMetaAgent : public Mutator, public Repairer {
 public:
  ExternalMetaAgent(std::vector<std::string> command, std::filesystem::path working_dir,
                    std::chrono::milliseconds timeout, CandidateStore& store,
                    std::vector<std::string> command_template);

  CandidateArtifact mutate(const CandidateArtifact& parent, const ReflectionFeedback& feedback,
                           const MutationContext& context) override;
  CandidateArtifact repair(const CandidateArtifact& broken, const QuickExamReport& report,
                           const MutationContext& context) override;

 private:
  std::string call(const Json& request);

  std::vector<std::string> command_;
  std::filesystem::path working_dir_;
  std::chrono::milliseconds timeout_;
  CandidateStore& store_;
  std::vector<std::string> command_template_;
};

}  // namespace memosearch
