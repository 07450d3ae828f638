#pragma once

#include <optional>
#include <string>
#include <vector>

#include "memosearch/common.hpp"

namespace memosearch {

// How to launch a candidate: argv plus working directory. An argv[0] of the
// form "builtin:<name>" selects an in-process reference candidate.
struct ProgramRef {
  std::vector<std::string> command;
  std::string working_dir;

  bool is_builtin() const;
  std::string builtin_name() const;
  std::string display() const;

  friend bool operator==(const ProgramRef&, const ProgramRef&) = default;
};

enum class CheckStatus { pass, fail, skipped };

struct ExamCheck {
  std::string name;
  CheckStatus status = CheckStatus::skipped;
  std::string detail;

  friend bool operator==(const ExamCheck&, const ExamCheck&) = default;
};

struct QuickExamReport {
  std::vector<ExamCheck> checks;

  bool passed() const;
  // Name of the first failing check, if any.
  std::optional<std::string> first_failure() const;
  int passed_count() const;
  std::string summary() const;

  friend bool operator==(const QuickExamReport&, const QuickExamReport&) = default;
};

struct CandidateArtifact {
  std::string candidate_id;
  std::optional<std::string> parent_id;
  ProgramRef program;
  // Content hash of the program text in the run's candidate store, if any.
  std::optional<std::string> source_digest;
  // Digest of the reflection feedback this candidate was mutated from.
  std::optional<std::string> feedback_digest;
  QuickExamReport exam_report;
  int created_round = 0;

  friend bool operator==(const CandidateArtifact&, const CandidateArtifact&) = default;
};

const char* to_string(CheckStatus status);
CheckStatus check_status_from_string(const std::string& s);

Json to_json(const ProgramRef& ref);
ProgramRef program_ref_from_json(const Json& j);
Json to_json(const QuickExamReport& report);
QuickExamReport exam_report_from_json(const Json& j);
Json to_json(const CandidateArtifact& artifact);
CandidateArtifact candidate_from_json(const Json& j);

}  // namespace memosearch
