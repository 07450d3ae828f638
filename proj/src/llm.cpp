#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "memosearch/llm.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "memosearch/log.hpp"

#ifndef MEMOSEARCH_PROMPT_DIR
#define MEMOSEARCH_PROMPT_DIR "prompts/v1"
#endif

namespace memosearch::llm {
namespace {

struct ParsedUrl {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string path;  // without trailing slash
};

ParsedUrl parse_url(const std::string& url) {
  ParsedUrl out;
  auto sep = url.find("://");
  if (sep == std::string::npos) throw ConfigError("endpoint.base_url", "missing scheme in '" + url + "'");
  out.scheme = url.substr(0, sep);
  if (out.scheme != "http" && out.scheme != "https")
    throw ConfigError("endpoint.base_url", "unsupported scheme '" + out.scheme + "'");
  auto rest = url.substr(sep + 3);
  auto slash = rest.find('/');
  std::string authority = rest.substr(0, slash);
  out.path = slash == std::string::npos ? "" : rest.substr(slash);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  if (authority.empty()) throw ConfigError("endpoint.base_url", "missing host");
  std::string port_text;
  if (authority.front() == '[') {
    auto close = authority.find(']');
    if (close == std::string::npos) throw ConfigError("endpoint.base_url", "bad IPv6 host");
    out.host = authority.substr(1, close - 1);
    if (close + 1 < authority.size() && authority[close + 1] == ':') port_text = authority.substr(close + 2);
  } else {
    auto colon = authority.rfind(':');
    out.host = authority.substr(0, colon);
    if (colon != std::string::npos) port_text = authority.substr(colon + 1);
  }
  if (!port_text.empty()) {
    try {
      out.port = std::stoi(port_text);
    } catch (const std::exception&) {
      throw ConfigError("endpoint.base_url", "bad port '" + port_text + "'");
    }
  } else {
    out.port = out.scheme == "https" ? 443 : 80;
  }
  return out;
}

bool is_loopback(const std::string& host) {
  return host == "localhost" || host == "::1" || host.rfind("127.", 0) == 0;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("endpoint.prompt_dir", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

const std::vector<std::string> kTemplateNames = {"reflect", "mutate", "initialize", "repair"};

const std::string* string_field(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw AdapterError("reflection reply: missing field '" + where + key + "'");
  if (!it->is_string()) throw AdapterError("reflection reply: field '" + where + key + "' is not a string");
  return it->get_ptr<const std::string*>();
}

std::string exam_error_message(const QuickExamReport& report) {
  std::ostringstream out;
  for (const auto& check : report.checks) {
    out << check.name << ": " << to_string(check.status);
    if (!check.detail.empty()) out << " (" << check.detail << ")";
    out << "\n";
  }
  return out.str();
}

}  // namespace

void ChatEndpointConfig::validate() const {
  auto url = parse_url(base_url);
  if (url.scheme != "https" && !is_loopback(url.host))
    throw ConfigError("endpoint.base_url", "https is required for non-loopback host '" + url.host + "'");
  if (model.empty()) throw ConfigError("endpoint.model", "must be set");
  if (request_timeout.count() <= 0) throw ConfigError("endpoint.request_timeout_ms", "must be positive");
  if (max_retries < 0 || max_retries > 10) throw ConfigError("endpoint.max_retries", "must be in [0, 10]");
  if (retry_backoff.count() < 0) throw ConfigError("endpoint.retry_backoff_ms", "must be non-negative");
}

ChatEndpointConfig endpoint_config_from_json(const Json& j, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix, "must be an object");
  ChatEndpointConfig c;
  for (const auto& [key, value] : j.items()) {
    auto field = prefix + "." + key;
    try {
      if (key == "base_url") c.base_url = value.get<std::string>();
      else if (key == "model") c.model = value.get<std::string>();
      else if (key == "api_key_env") c.api_key_env = value.get<std::string>();
      else if (key == "request_timeout_ms") c.request_timeout = std::chrono::milliseconds(value.get<std::int64_t>());
      else if (key == "max_retries") c.max_retries = value.get<int>();
      else if (key == "retry_backoff_ms") c.retry_backoff = std::chrono::milliseconds(value.get<std::int64_t>());
      else if (key == "temperature") c.temperature = value.get<double>();
      else if (key == "env_id") c.env_id = value.get<std::string>();
      else if (key == "task_description") c.task_description = value.get<std::string>();
      else if (key == "prompt_dir") c.prompt_dir = value.get<std::string>();
      else if (key == "api_key") throw ConfigError(field, "secrets belong in the environment; set api_key_env");
      else throw ConfigError(field, "unknown key");
    } catch (const Json::exception& e) {
      throw ConfigError(field, std::string("wrong type: ") + e.what());
    }
  }
  c.validate();
  return c;
}

Json to_json(const ChatEndpointConfig& c) {
  Json j = {{"base_url", c.base_url},
            {"model", c.model},
            {"api_key_env", c.api_key_env},
            {"request_timeout_ms", c.request_timeout.count()},
            {"max_retries", c.max_retries},
            {"retry_backoff_ms", c.retry_backoff.count()},
            {"env_id", c.env_id},
            {"task_description", c.task_description}};
  if (c.temperature) j["temperature"] = *c.temperature;
  if (!c.prompt_dir.empty()) j["prompt_dir"] = c.prompt_dir.string();
  return j;
}

HttpChatClient::HttpChatClient(ChatEndpointConfig config) : config_(std::move(config)) {
  config_.validate();
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    api_key_ = key;
    log::register_secret(api_key_);
  }
}

std::string HttpChatClient::complete(const std::string& system, const std::string& user) {
  auto url = parse_url(config_.base_url);
  auto origin = url.scheme + "://" + (url.host.find(':') != std::string::npos ? "[" + url.host + "]" : url.host) +
                ":" + std::to_string(url.port);
  httplib::Client client(origin);
  auto timeout = config_.request_timeout;
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                (timeout.count() % 1000) * 1000);
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                          (timeout.count() % 1000) * 1000);
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                           (timeout.count() % 1000) * 1000);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  Json body = {{"model", config_.model},
               {"messages", Json::array({{{"role", "system"}, {"content", system}},
                                         {{"role", "user"}, {"content", user}}})}};
  if (config_.temperature) body["temperature"] = *config_.temperature;
  auto payload = body.dump();
  auto path = url.path + "/chat/completions";

  std::string last_error;
  int attempts = config_.max_retries + 1;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    ++attempts_;
    if (attempt > 1 && config_.retry_backoff.count() > 0)
      std::this_thread::sleep_for(config_.retry_backoff * (1 << (attempt - 2)));
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      log::warn("chat endpoint attempt " + std::to_string(attempt) + ": " + last_error);
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      log::warn("chat endpoint attempt " + std::to_string(attempt) + ": " + last_error);
      continue;
    }
    if (res->status != 200)
      throw AdapterError(log::redact("chat endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                     res->body.substr(0, 500)));
    try {
      auto reply = Json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const Json::exception& e) {
      throw AdapterError(std::string("chat endpoint reply is not a completion: ") + e.what());
    }
  }
  throw AdapterError("chat endpoint failed after " + std::to_string(attempts) + " attempts: " + last_error);
}

std::string render_template(const std::string& text, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      auto close = text.find('}', i + 1);
      if (close != std::string::npos) {
        auto it = vars.find(text.substr(i + 1, close - i - 1));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

PromptLibrary::PromptLibrary(const std::filesystem::path& dir) {
  for (const auto& name : kTemplateNames) {
    auto text = read_file(dir / (name + ".txt"));
    auto sys = text.find("[SYSTEM]");
    auto usr = text.find("[USER]");
    if (sys == std::string::npos || usr == std::string::npos || usr < sys)
      throw ConfigError("endpoint.prompt_dir", name + ".txt needs [SYSTEM] then [USER] sections");
    Prompt p;
    p.system = trim(text.substr(sys + 8, usr - sys - 8));
    p.user = trim(text.substr(usr + 6));
    templates_[name] = std::move(p);
  }
}

std::filesystem::path PromptLibrary::bundled_dir() { return MEMOSEARCH_PROMPT_DIR; }

Prompt PromptLibrary::render(const std::string& name, const std::map<std::string, std::string>& vars) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw Error("unknown prompt template '" + name + "'");
  return {render_template(it->second.system, vars), render_template(it->second.user, vars)};
}

std::vector<std::string> PromptLibrary::placeholders(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw Error("unknown prompt template '" + name + "'");
  std::vector<std::string> out;
  for (const auto* text : {&it->second.system, &it->second.user}) {
    for (std::size_t i = 0; (i = text->find('{', i)) != std::string::npos; ++i) {
      std::size_t j = i + 1;
      while (j < text->size() && (std::islower(static_cast<unsigned char>((*text)[j])) || (*text)[j] == '_')) ++j;
      if (j < text->size() && (*text)[j] == '}' && j > i + 1) {
        auto var = text->substr(i + 1, j - i - 1);
        if (std::find(out.begin(), out.end(), var) == out.end()) out.push_back(var);
      }
    }
  }
  return out;
}

std::optional<std::string> extract_code_block(const std::string& reply, int* block_count) {
  std::optional<std::string> first;
  int count = 0;
  std::size_t pos = 0;
  while (true) {
    auto open = reply.find("```", pos);
    if (open == std::string::npos) break;
    auto line_end = reply.find('\n', open);
    if (line_end == std::string::npos) break;
    auto close = reply.find("```", line_end + 1);
    // A closing fence sits at the start of a line.
    while (close != std::string::npos && close > 0 && reply[close - 1] != '\n') close = reply.find("```", close + 3);
    if (close == std::string::npos) break;
    ++count;
    if (!first) first = reply.substr(line_end + 1, close - line_end - 1);
    pos = close + 3;
  }
  if (block_count) *block_count = count;
  return first;
}

ReflectionFeedback parse_reflection_reply(const std::string& reply) {
  Json doc;
  auto block = extract_code_block(reply);
  auto text = block ? *block : reply;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception&) {
    // Prose around a bare object: take the outermost braces.
    auto b = reply.find('{');
    auto e = reply.rfind('}');
    if (b == std::string::npos || e == std::string::npos || e < b)
      throw AdapterError("reflection reply: no JSON object found");
    try {
      doc = Json::parse(reply.substr(b, e - b + 1));
    } catch (const Json::exception& ex) {
      throw AdapterError(std::string("reflection reply: invalid JSON: ") + ex.what());
    }
  }
  if (!doc.is_object()) throw AdapterError("reflection reply: top level is not an object");

  ReflectionFeedback f;
  for (const char* key : {"trajectory_score_assessment", "suggested_changes"}) {
    if (!doc.contains(key)) throw AdapterError(std::string("reflection reply: missing field '") + key + "'");
    if (!doc[key].is_array()) throw AdapterError(std::string("reflection reply: field '") + key + "' is not an array");
  }
  const auto& assessments = doc["trajectory_score_assessment"];
  for (std::size_t i = 0; i < assessments.size(); ++i) {
    const auto& a = assessments[i];
    auto where = "trajectory_score_assessment[" + std::to_string(i) + "].";
    if (!a.is_object()) throw AdapterError("reflection reply: " + where + " is not an object");
    PayloadAssessment pa;
    const auto* label = string_field(a, "label", where);
    try {
      pa.label = payload_label_from_string(*label);
    } catch (const SchemaError&) {
      throw AdapterError("reflection reply: " + where + "label '" + *label + "' is not one of Useful, "
                         "Potentially Useful, Irrelevant, Empty/BadFormat");
    }
    pa.note = *string_field(a, "how_it_can_help", where);
    f.assessments.push_back(std::move(pa));
  }
  const auto& changes = doc["suggested_changes"];
  for (std::size_t i = 0; i < changes.size(); ++i) {
    const auto& c = changes[i];
    auto where = "suggested_changes[" + std::to_string(i) + "].";
    if (!c.is_object()) throw AdapterError("reflection reply: " + where + " is not an object");
    SuggestedChange sc;
    const auto* priority = string_field(c, "priority", where);
    try {
      sc.priority = priority_from_string(*priority);
    } catch (const SchemaError&) {
      throw AdapterError("reflection reply: " + where + "priority '" + *priority + "' is not one of High, Medium, Low");
    }
    sc.what = *string_field(c, "what", where);
    sc.why = *string_field(c, "why", where);
    f.suggested_changes.push_back(std::move(sc));
  }
  std::string diagnosis;
  for (const char* key : {"content_quality_issues", "structure_and_coherence", "learned_from_suggestion_example"}) {
    auto it = doc.find(key);
    if (it == doc.end()) continue;
    if (!diagnosis.empty()) diagnosis += "\n\n";
    diagnosis += it->is_string() ? it->get<std::string>() : it->dump();
  }
  f.diagnosis = std::move(diagnosis);
  return f;
}

std::string render_trajectories(const EvidenceBundle& evidence) {
  std::ostringstream out;
  auto emit = [&](const char* kind, const std::vector<TrajectorySample>& samples) {
    for (const auto& s : samples) {
      out << "<" << kind << " task_id=\"" << s.task_id << "\" reward=\"" << s.reward << "\">\n";
      out << "Task: " << s.task_text << "\n";
      out << "Retrieved memory: " << (s.memory_text.empty() ? "(empty)" : s.memory_text) << "\n";
      for (const auto& img : s.memory_images) out << "Memory image: " << to_json(img).dump() << "\n";
      out << "Trajectory summary:\n" << s.observation_summary << "\n";
      for (const auto& img : s.images) out << "Image: " << to_json(img).dump() << "\n";
      out << "</" << kind << ">\n";
    }
  };
  emit("success", evidence.successes);
  emit("failure", evidence.failures);
  auto text = out.str();
  return text.empty() ? "(no trajectories)" : text;
}

std::string program_from_reply(const std::string& reply) {
  int blocks = 0;
  auto code = extract_code_block(reply, &blocks);
  if (!code) throw AdapterError("reply contains no fenced code block");
  if (blocks > 1) log::warn("reply has " + std::to_string(blocks) + " fenced code blocks; using the first");
  return *code;
}

LlmReflector::LlmReflector(ChatTransport& chat, const PromptLibrary& prompts, ChatEndpointConfig config)
    : chat_(chat), prompts_(prompts), config_(std::move(config)) {}

ReflectionFeedback LlmReflector::reflect(const EvidenceBundle& evidence) {
  auto prompt = prompts_.render(
      "reflect", {{"task_description", config_.task_description},
                  {"improve_example", "No previous suggestion is available for this run."},
                  {"source_code", evidence.parent_source.empty() ? "(source unavailable)" : evidence.parent_source},
                  {"trajectory_examples", render_trajectories(evidence)},
                  {"benchmark_overall_eval_score", std::to_string(evidence.score)}});
  auto feedback = parse_reflection_reply(chat_.complete(prompt.system, prompt.user));
  for (const auto& s : evidence.successes) feedback.sampled_tasks.push_back(s.task_id);
  for (const auto& s : evidence.failures) feedback.sampled_tasks.push_back(s.task_id);
  return feedback;
}

LlmMutator::LlmMutator(ChatTransport& chat, const PromptLibrary& prompts, ChatEndpointConfig config,
                       CandidateStore& store, std::vector<std::string> command_template)
    : chat_(chat), prompts_(prompts), config_(std::move(config)), store_(store),
      command_template_(std::move(command_template)) {}

std::string LlmMutator::mutate_text(const std::string& parent_source, const ReflectionFeedback& feedback,
                                    double score) {
  Prompt prompt;
  if (parent_source.empty()) {
    prompt = prompts_.render("initialize", {{"env_id", config_.env_id}, {"task_description", config_.task_description}});
  } else {
    auto fb = to_json(feedback);
    prompt = prompts_.render("mutate", {{"env_id", config_.env_id},
                                        {"task_description", config_.task_description},
                                        {"source_code", parent_source},
                                        {"benchmark_overall_eval_score", std::to_string(score)},
                                        {"trajectory_score_assessment", fb["assessments"].dump()},
                                        {"suggested_changes", fb["suggested_changes"].dump()}});
  }
  return program_from_reply(chat_.complete(prompt.system, prompt.user));
}

CandidateArtifact LlmMutator::mutate(const CandidateArtifact& parent, const ReflectionFeedback& feedback,
                                     const MutationContext& context) {
  auto source = candidate_source(store_, parent);
  auto text = mutate_text(source, feedback, context.parent_score);
  auto child = materialize_candidate(store_, command_template_, context.candidate_id, text);
  child.parent_id = parent.candidate_id;
  child.created_round = context.round;
  return child;
}

LlmRepairer::LlmRepairer(ChatTransport& chat, const PromptLibrary& prompts, CandidateStore& store,
                         std::vector<std::string> command_template)
    : chat_(chat), prompts_(prompts), store_(store), command_template_(std::move(command_template)) {}

std::string LlmRepairer::repair_text(const std::string& source, const QuickExamReport& report) {
  if (!report.first_failure()) throw DomainError("repair requires an exam report with a failing check");
  auto prompt = prompts_.render("repair", {{"code_str", source}, {"error_msg", exam_error_message(report)}});
  return program_from_reply(chat_.complete(prompt.system, prompt.user));
}

CandidateArtifact LlmRepairer::repair(const CandidateArtifact& broken, const QuickExamReport& report,
                                      const MutationContext& context) {
  auto source = candidate_source(store_, broken);
  auto text = repair_text(source, report);
  auto fixed = materialize_candidate(store_, command_template_, context.candidate_id, text);
  fixed.parent_id = broken.parent_id;
  fixed.created_round = context.round;
  return fixed;
}

}  // namespace memosearch::llm
