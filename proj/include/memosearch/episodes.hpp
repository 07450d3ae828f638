#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "memosearch/common.hpp"

namespace memosearch {

enum class ImageKind { path, url };

struct ImageRef {
  ImageKind kind = ImageKind::path;
  std::string value;  // relative path or URL
  std::optional<std::string> mime;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct InitRecord {
  std::string task_text;
  std::vector<ImageRef> images;
  Json metadata = Json::object();

  friend bool operator==(const InitRecord&, const InitRecord&) = default;
};

struct StepRecord {
  int index = 0;
  std::string action_text;
  std::string observation_text;
  std::vector<ImageRef> observation_images;
  double timestamp = 0.0;  // seconds on a monotonic clock

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct MemoryItem {
  std::optional<std::string> text;
  std::optional<std::vector<ImageRef>> images;
  std::optional<Json> metadata;

  friend bool operator==(const MemoryItem&, const MemoryItem&) = default;
};

struct RetrievedMemoryPayload {
  std::vector<MemoryItem> items;
  Json metadata = Json::object();

  std::size_t image_count() const;
  friend bool operator==(const RetrievedMemoryPayload&, const RetrievedMemoryPayload&) = default;
};

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct EpisodeRecorder {
  std::string task_id;
  InitRecord init;
  std::vector<StepRecord> steps;
  std::optional<RetrievedMemoryPayload> memory_retrieved;
  std::optional<double> reward;  // present iff the episode finished
  std::vector<ChatMessage> messages;
  std::string artifact_root;     // directory path-kind images resolve against

  bool finished() const { return reward.has_value(); }
  // Retrieve-time input: task and initial observation only.
  bool is_partial() const { return steps.empty() && !reward && !memory_retrieved; }
  EpisodeRecorder partial_view() const;

  friend bool operator==(const EpisodeRecorder&, const EpisodeRecorder&) = default;
};

struct TruncationReport {
  int dropped_images = 0;
  int cut_chars = 0;

  bool empty() const { return dropped_images == 0 && cut_chars == 0; }
  friend bool operator==(const TruncationReport&, const TruncationReport&) = default;
};

// The payload as handed to the execution agent: image-trimmed structure plus
// its pretty-printed JSON text cut to the character budget.
struct TruncatedPayload {
  RetrievedMemoryPayload payload;
  std::string text;
  TruncationReport report;
};

// A resolved image: a local file, or a URL left for the consumer to fetch.
struct ImageHandle {
  ImageKind kind = ImageKind::path;
  std::filesystem::path local_path;
  std::string url;
  std::optional<std::string> mime;

  friend bool operator==(const ImageHandle&, const ImageHandle&) = default;
};

RetrievedMemoryPayload empty_payload();

// Structural validation of a raw retrieve() result. Unknown keys are kept in
// the nearest metadata map. Throws SchemaError with a JSON pointer.
RetrievedMemoryPayload validate_payload(const Json& raw);

ImageRef validate_image_ref(const Json& raw, const std::string& path = "");

// Keeps the first image_budget images across the payload in items order,
// then cuts the pretty-printed serialization to char_budget code points.
TruncatedPayload truncate_payload(const RetrievedMemoryPayload& payload, int char_budget, int image_budget);

// Path refs resolve under artifact_root (SecurityError on escape,
// ResolutionError when missing); URL refs come back unresolved.
std::vector<ImageHandle> resolve_images(const RetrievedMemoryPayload& payload,
                                        const std::filesystem::path& artifact_root);

// Pretty-printed serialization used for budgets and prompt injection.
std::string payload_text(const RetrievedMemoryPayload& payload);
std::size_t utf8_length(std::string_view text);
// First max_chars code points of text.
std::string utf8_prefix(std::string_view text, std::size_t max_chars);

const char* to_string(ImageKind kind);

Json to_json(const ImageRef& ref);
Json to_json(const MemoryItem& item);
Json to_json(const RetrievedMemoryPayload& payload);
Json to_json(const StepRecord& step);
Json to_json(const EpisodeRecorder& episode);
Json to_json(const TruncationReport& report);
EpisodeRecorder episode_from_json(const Json& j);

}  // namespace memosearch
