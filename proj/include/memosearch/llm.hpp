#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "memosearch/journal.hpp"
#include "memosearch/lifecycle.hpp"

// Meta-agent contracts backed by an OpenAI-compatible chat-completions
// endpoint and the prompt templates under prompts/v1.
namespace memosearch::llm {

struct ChatEndpointConfig {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds request_timeout{120'000};
  int max_retries = 2;  // attempts = max_retries + 1
  std::chrono::milliseconds retry_backoff{1'000};
  std::optional<double> temperature;
  std::string env_id = "memory-design search";
  std::string task_description;
  std::filesystem::path prompt_dir;  // empty: the bundled templates

  // https is required except for loopback hosts.
  void validate() const;
  friend bool operator==(const ChatEndpointConfig&, const ChatEndpointConfig&) = default;
};

ChatEndpointConfig endpoint_config_from_json(const Json& j, const std::string& prefix = "endpoint");
Json to_json(const ChatEndpointConfig& config);  // never contains the key itself

// One system + user exchange. Throws AdapterError after exhausting retries.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const std::string& system, const std::string& user) = 0;
};

class HttpChatClient : public ChatTransport {
 public:
  // Reads the key from the configured environment variable and registers it
  // for log redaction. A missing key is allowed for keyless local servers.
  explicit HttpChatClient(ChatEndpointConfig config);
  std::string complete(const std::string& system, const std::string& user) override;
  int attempts_made() const { return attempts_; }

 private:
  ChatEndpointConfig config_;
  std::string api_key_;
  int attempts_ = 0;
};

struct Prompt {
  std::string system;
  std::string user;
};

// Replaces {name} for every name in vars; other braces are left alone.
std::string render_template(const std::string& text, const std::map<std::string, std::string>& vars);

class PromptLibrary {
 public:
  // Loads reflect, mutate, initialize and repair templates from dir. Each
  // file holds a [SYSTEM] section followed by a [USER] section.
  explicit PromptLibrary(const std::filesystem::path& dir);
  static std::filesystem::path bundled_dir();
  Prompt render(const std::string& name, const std::map<std::string, std::string>& vars) const;
  // Placeholder names used by a template, in order of first use.
  std::vector<std::string> placeholders(const std::string& name) const;

 private:
  std::map<std::string, Prompt> templates_;
};

// First fenced code block of a reply; nullopt when there is none. Sets
// block_count when given.
std::optional<std::string> extract_code_block(const std::string& reply, int* block_count = nullptr);

// Parses the analysis reply (a JSON object, optionally fenced). Throws
// AdapterError naming a missing field or an out-of-enum label.
ReflectionFeedback parse_reflection_reply(const std::string& reply);

// Text rendering of sampled trajectories for the analysis prompt.
std::string render_trajectories(const EvidenceBundle& evidence);

class LlmReflector : public Reflector {
 public:
  LlmReflector(ChatTransport& chat, const PromptLibrary& prompts, ChatEndpointConfig config);
  ReflectionFeedback reflect(const EvidenceBundle& evidence) override;

 private:
  ChatTransport& chat_;
  const PromptLibrary& prompts_;
  ChatEndpointConfig config_;
};

// Program text from a reply, with the extraction rule applied.
std::string program_from_reply(const std::string& reply);

class LlmMutator : public Mutator {
 public:
  LlmMutator(ChatTransport& chat, const PromptLibrary& prompts, ChatEndpointConfig config, CandidateStore& store,
             std::vector<std::string> command_template);
  CandidateArtifact mutate(const CandidateArtifact& parent, const ReflectionFeedback& feedback,
                           const MutationContext& context) override;
  // Program text only; exposed for tests and one-off use.
  std::string mutate_text(const std::string& parent_source, const ReflectionFeedback& feedback, double score);

 private:
  ChatTransport& chat_;
  const PromptLibrary& prompts_;
  ChatEndpointConfig config_;
  CandidateStore& store_;
  std::vector<std::string> command_template_;
};

class LlmRepairer : public Repairer {
 public:
  LlmRepairer(ChatTransport& chat, const PromptLibrary& prompts, CandidateStore& store,
              std::vector<std::string> command_template);
  CandidateArtifact repair(const CandidateArtifact& broken, const QuickExamReport& report,
                           const MutationContext& context) override;
  // Throws DomainError when the report has no failing check.
  std::string repair_text(const std::string& source, const QuickExamReport& report);

 private:
  ChatTransport& chat_;
  const PromptLibrary& prompts_;
  CandidateStore& store_;
  std::vector<std::string> command_template_;
};

}  // namespace memosearch::llm
