#include "memosearch/artifact.hpp"

#include <algorithm>

namespace memosearch {

namespace {
constexpr std::string_view kBuiltinPrefix = "builtin:";
}

bool ProgramRef::is_builtin() const {
  return !command.empty() && command.front().rfind(kBuiltinPrefix, 0) == 0;
}

std::string ProgramRef::builtin_name() const {
  return is_builtin() ? command.front().substr(kBuiltinPrefix.size()) : std::string{};
}

std::string ProgramRef::display() const {
  std::string out;
  for (const auto& arg : command) {
    if (!out.empty()) out += ' ';
    out += arg;
  }
  return out;
}

bool QuickExamReport::passed() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const ExamCheck& c) { return c.status == CheckStatus::pass; });
}

std::optional<std::string> QuickExamReport::first_failure() const {
  for (const auto& c : checks) {
    if (c.status == CheckStatus::fail) return c.name;
  }
  return std::nullopt;
}

int QuickExamReport::passed_count() const {
  return static_cast<int>(
      std::count_if(checks.begin(), checks.end(), [](const ExamCheck& c) { return c.status == CheckStatus::pass; }));
}

std::string QuickExamReport::summary() const {
  std::string out = std::to_string(passed_count()) + "/" + std::to_string(checks.size()) + " checks passed";
  for (const auto& c : checks) {
    if (c.status == CheckStatus::fail) out += "; failed " + c.name + ": " + c.detail;
  }
  return out;
}

const char* to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::skipped: return "skipped";
  }
  return "skipped";
}

CheckStatus check_status_from_string(const std::string& s) {
  if (s == "pass") return CheckStatus::pass;
  if (s == "fail") return CheckStatus::fail;
  if (s == "skipped") return CheckStatus::skipped;
  throw SchemaError("/status", "unknown check status '" + s + "'");
}

Json to_json(const ProgramRef& ref) {
  return Json{{"command", ref.command}, {"working_dir", ref.working_dir}};
}

ProgramRef program_ref_from_json(const Json& j) {
  ProgramRef ref;
  ref.command = j.at("command").get<std::vector<std::string>>();
  ref.working_dir = j.value("working_dir", std::string{});
  return ref;
}

Json to_json(const QuickExamReport& report) {
  Json checks = Json::array();
  for (const auto& c : report.checks) {
    checks.push_back(Json{{"name", c.name}, {"status", to_string(c.status)}, {"detail", c.detail}});
  }
  return Json{{"overall", report.passed() ? "pass" : "fail"}, {"checks", checks}};
}

QuickExamReport exam_report_from_json(const Json& j) {
  QuickExamReport report;
  for (const auto& c : j.at("checks")) {
    report.checks.push_back(ExamCheck{c.at("name").get<std::string>(),
                                      check_status_from_string(c.at("status").get<std::string>()),
                                      c.value("detail", std::string{})});
  }
  return report;
}

Json to_json(const CandidateArtifact& a) {
  Json j;
  j["candidate_id"] = a.candidate_id;
  j["parent_id"] = a.parent_id ? Json(*a.parent_id) : Json(nullptr);
  j["program"] = to_json(a.program);
  j["source_digest"] = a.source_digest ? Json(*a.source_digest) : Json(nullptr);
  j["feedback_digest"] = a.feedback_digest ? Json(*a.feedback_digest) : Json(nullptr);
  j["exam_report"] = to_json(a.exam_report);
  j["created_round"] = a.created_round;
  return j;
}

CandidateArtifact candidate_from_json(const Json& j) {
  CandidateArtifact a;
  a.candidate_id = j.at("candidate_id").get<std::string>();
  if (auto it = j.find("parent_id"); it != j.end() && !it->is_null()) a.parent_id = it->get<std::string>();
  a.program = program_ref_from_json(j.at("program"));
  if (auto it = j.find("source_digest"); it != j.end() && !it->is_null()) a.source_digest = it->get<std::string>();
  if (auto it = j.find("feedback_digest"); it != j.end() && !it->is_null())
    a.feedback_digest = it->get<std::string>();
  if (auto it = j.find("exam_report"); it != j.end()) a.exam_report = exam_report_from_json(*it);
  a.created_round = j.value("created_round", 0);
  return a;
}

}  // namespace memosearch
