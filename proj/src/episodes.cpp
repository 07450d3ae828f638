#include "memosearch/episodes.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace memosearch {

namespace {

bool is_absolute_like(const std::string& p) {
  if (p.empty()) return false;
  if (p[0] == '/' || p[0] == '\\') return true;
  return p.size() >= 2 && std::isalpha(static_cast<unsigned char>(p[0])) && p[1] == ':';
}

bool has_parent_component(const std::string& p) {
  std::size_t start = 0;
  while (start <= p.size()) {
    std::size_t end = p.find_first_of("/\\", start);
    if (end == std::string::npos) end = p.size();
    if (p.compare(start, end - start, "..") == 0) return true;
    start = end + 1;
  }
  return false;
}

bool looks_like_url(const std::string& s) {
  static const std::regex url(R"(^[A-Za-z][A-Za-z0-9+.\-]*://[^\s/?#]+[^\s]*$)");
  return std::regex_match(s, url);
}

void put_extra(Json& metadata, const std::string& key, const Json& value) {
  std::string k = key;
  while (metadata.contains(k)) k = "_extra_" + k;
  metadata[k] = value;
}

MemoryItem validate_item(const Json& raw, const std::string& path) {
  if (!raw.is_object()) throw SchemaError(path, "memory item must be an object");
  if (raw.contains("items")) throw SchemaError(path + "/items", "nested payloads are not allowed");
  MemoryItem item;
  Json extras = Json::object();
  for (const auto& [key, value] : raw.items()) {
    if (key == "text") {
      if (!value.is_string()) throw SchemaError(path + "/text", "text must be a string");
      item.text = value.get<std::string>();
    } else if (key == "images") {
      if (!value.is_array()) throw SchemaError(path + "/images", "images must be a list");
      std::vector<ImageRef> images;
      for (std::size_t i = 0; i < value.size(); ++i)
        images.push_back(validate_image_ref(value[i], path + "/images/" + std::to_string(i)));
      item.images = std::move(images);
    } else if (key == "metadata") {
      if (!value.is_object()) throw SchemaError(path + "/metadata", "metadata must be an object");
      item.metadata = value;
    } else {
      extras[key] = value;
    }
  }
  if (!extras.empty()) {
    if (!item.metadata) item.metadata = Json::object();
    for (const auto& [key, value] : extras.items()) put_extra(*item.metadata, key, value);
  }
  if (!item.text && !item.images && !item.metadata)
    throw SchemaError(path, "memory item needs at least one of text, images, metadata");
  return item;
}

std::vector<ImageRef> images_from_json(const Json& j, const std::string& path) {
  std::vector<ImageRef> out;
  if (j.is_null()) return out;
  if (!j.is_array()) throw SchemaError(path, "images must be a list");
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(validate_image_ref(j[i], path + "/" + std::to_string(i)));
  return out;
}

Json images_to_json(const std::vector<ImageRef>& images) {
  Json arr = Json::array();
  for (const auto& img : images) arr.push_back(to_json(img));
  return arr;
}

}  // namespace

std::size_t RetrievedMemoryPayload::image_count() const {
  std::size_t n = 0;
  for (const auto& item : items) n += item.images ? item.images->size() : 0;
  return n;
}

EpisodeRecorder EpisodeRecorder::partial_view() const {
  EpisodeRecorder p;
  p.task_id = task_id;
  p.init = init;
  p.artifact_root = artifact_root;
  return p;
}

RetrievedMemoryPayload empty_payload() { return RetrievedMemoryPayload{}; }

ImageRef validate_image_ref(const Json& raw, const std::string& path) {
  if (!raw.is_object()) throw SchemaError(path, "image ref must be an object");
  for (const auto& [key, _] : raw.items()) {
    if (key != "kind" && key != "value" && key != "mime") throw SchemaError(path + "/" + key, "unknown image ref field");
  }
  auto kind = raw.find("kind");
  if (kind == raw.end() || !kind->is_string()) throw SchemaError(path + "/kind", "kind must be \"path\" or \"url\"");
  auto value = raw.find("value");
  if (value == raw.end() || !value->is_string() || value->get<std::string>().empty())
    throw SchemaError(path + "/value", "value must be a nonempty string");
  ImageRef ref;
  ref.value = value->get<std::string>();
  const auto k = kind->get<std::string>();
  if (k == "path") {
    ref.kind = ImageKind::path;
    if (is_absolute_like(ref.value)) throw SchemaError(path + "/value", "path must be relative");
    if (has_parent_component(ref.value)) throw SchemaError(path + "/value", "path must not contain '..'");
  } else if (k == "url") {
    ref.kind = ImageKind::url;
    if (!looks_like_url(ref.value)) throw SchemaError(path + "/value", "value is not a URL");
  } else {
    throw SchemaError(path + "/kind", "kind must be \"path\" or \"url\"");
  }
  if (auto mime = raw.find("mime"); mime != raw.end() && !mime->is_null()) {
    if (!mime->is_string()) throw SchemaError(path + "/mime", "mime must be a string");
    ref.mime = mime->get<std::string>();
  }
  return ref;
}

RetrievedMemoryPayload validate_payload(const Json& raw) {
  if (!raw.is_object()) throw SchemaError("", "payload must be an object");
  auto items = raw.find("items");
  if (items == raw.end()) throw SchemaError("/items", "missing items");
  if (!items->is_array()) throw SchemaError("/items", "items must be a flat list");
  RetrievedMemoryPayload payload;
  for (std::size_t i = 0; i < items->size(); ++i)
    payload.items.push_back(validate_item((*items)[i], "/items/" + std::to_string(i)));
  if (auto meta = raw.find("metadata"); meta != raw.end()) {
    if (!meta->is_object()) throw SchemaError("/metadata", "metadata must be an object");
    payload.metadata = *meta;
  }
  for (const auto& [key, value] : raw.items()) {
    if (key != "items" && key != "metadata") put_extra(payload.metadata, key, value);
  }
  return payload;
}

std::string payload_text(const RetrievedMemoryPayload& payload) {
  return to_json(payload).dump(2, ' ', false, Json::error_handler_t::replace);
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) n += (c & 0xC0) != 0x80;
  return n;
}

std::string utf8_prefix(std::string_view text, std::size_t max_chars) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
      if (count == max_chars) return std::string(text.substr(0, i));
      ++count;
    }
  }
  return std::string(text);
}

TruncatedPayload truncate_payload(const RetrievedMemoryPayload& payload, int char_budget, int image_budget) {
  TruncatedPayload out;
  out.payload = payload;
  std::size_t kept = 0;
  const auto budget = static_cast<std::size_t>(std::max(image_budget, 0));
  for (auto& item : out.payload.items) {
    if (!item.images) continue;
    auto& imgs = *item.images;
    const std::size_t room = budget - std::min(kept, budget);
    if (imgs.size() > room) {
      out.report.dropped_images += static_cast<int>(imgs.size() - room);
      imgs.resize(room);
    }
    kept += imgs.size();
  }
  const std::string full = payload_text(out.payload);
  const std::size_t length = utf8_length(full);
  const auto limit = static_cast<std::size_t>(std::max(char_budget, 0));
  if (length > limit) {
    out.text = utf8_prefix(full, limit);
    out.report.cut_chars = static_cast<int>(length - limit);
  } else {
    out.text = full;
  }
  return out;
}

std::vector<ImageHandle> resolve_images(const RetrievedMemoryPayload& payload,
                                        const std::filesystem::path& artifact_root) {
  namespace fs = std::filesystem;
  std::vector<ImageHandle> handles;
  const fs::path root = fs::weakly_canonical(fs::absolute(artifact_root));
  for (const auto& item : payload.items) {
    if (!item.images) continue;
    for (const auto& ref : *item.images) {
      ImageHandle h;
      h.kind = ref.kind;
      h.mime = ref.mime;
      if (ref.kind == ImageKind::url) {
        h.url = ref.value;
        handles.push_back(std::move(h));
        continue;
      }
      if (is_absolute_like(ref.value) || has_parent_component(ref.value))
        throw SecurityError("image path escapes the artifact root: " + ref.value);
      const fs::path candidate = fs::weakly_canonical(root / ref.value);
      auto [root_end, _] = std::mismatch(root.begin(), root.end(), candidate.begin(), candidate.end());
      if (root_end != root.end()) throw SecurityError("image path escapes the artifact root: " + ref.value);
      if (!fs::is_regular_file(candidate)) throw ResolutionError("image not found: " + ref.value);
      h.local_path = candidate;
      handles.push_back(std::move(h));
    }
  }
  return handles;
}

const char* to_string(ImageKind kind) { return kind == ImageKind::path ? "path" : "url"; }

Json to_json(const ImageRef& ref) {
  Json j{{"kind", to_string(ref.kind)}, {"value", ref.value}};
  if (ref.mime) j["mime"] = *ref.mime;
  return j;
}

Json to_json(const MemoryItem& item) {
  Json j = Json::object();
  if (item.text) j["text"] = *item.text;
  if (item.images) j["images"] = images_to_json(*item.images);
  if (item.metadata) j["metadata"] = *item.metadata;
  return j;
}

Json to_json(const RetrievedMemoryPayload& payload) {
  Json items = Json::array();
  for (const auto& item : payload.items) items.push_back(to_json(item));
  return Json{{"items", items}, {"metadata", payload.metadata}};
}

Json to_json(const StepRecord& s) {
  return Json{{"index", s.index},
              {"action_text", s.action_text},
              {"observation_text", s.observation_text},
              {"observation_images", images_to_json(s.observation_images)},
              {"timestamp", s.timestamp}};
}

Json to_json(const EpisodeRecorder& e) {
  Json j;
  j["task_id"] = e.task_id;
  j["init"] = Json{{"task_text", e.init.task_text}, {"images", images_to_json(e.init.images)},
                   {"metadata", e.init.metadata}};
  Json steps = Json::array();
  for (const auto& s : e.steps) steps.push_back(to_json(s));
  j["steps"] = steps;
  j["memory_retrieved"] = e.memory_retrieved ? to_json(*e.memory_retrieved) : Json(nullptr);
  j["reward"] = e.reward ? Json(*e.reward) : Json(nullptr);
  Json messages = Json::array();
  for (const auto& m : e.messages) messages.push_back(Json{{"role", m.role}, {"content", m.content}});
  j["messages"] = messages;
  if (!e.artifact_root.empty()) j["artifact_root"] = e.artifact_root;
  return j;
}

Json to_json(const TruncationReport& r) {
  return Json{{"dropped_images", r.dropped_images}, {"cut_chars", r.cut_chars}};
}

EpisodeRecorder episode_from_json(const Json& j) {
  if (!j.is_object()) throw SchemaError("", "episode must be an object");
  EpisodeRecorder e;
  try {
    e.task_id = j.value("task_id", std::string{});
    const Json& init = j.at("init");
    if (!init.is_object()) throw SchemaError("/init", "init must be an object");
    e.init.task_text = init.value("task_text", std::string{});
    if (auto it = init.find("images"); it != init.end()) e.init.images = images_from_json(*it, "/init/images");
    if (auto it = init.find("metadata"); it != init.end() && !it->is_null()) {
      if (!it->is_object()) throw SchemaError("/init/metadata", "metadata must be an object");
      e.init.metadata = *it;
    }
    if (auto it = j.find("steps"); it != j.end() && !it->is_null()) {
      if (!it->is_array()) throw SchemaError("/steps", "steps must be a list");
      for (std::size_t i = 0; i < it->size(); ++i) {
        const Json& s = (*it)[i];
        StepRecord step;
        step.index = s.value("index", static_cast<int>(i));
        if (step.index != static_cast<int>(i))
          throw SchemaError("/steps/" + std::to_string(i) + "/index", "step indices must be contiguous from 0");
        step.action_text = s.value("action_text", std::string{});
        step.observation_text = s.value("observation_text", std::string{});
        if (auto imgs = s.find("observation_images"); imgs != s.end())
          step.observation_images = images_from_json(*imgs, "/steps/" + std::to_string(i) + "/observation_images");
        step.timestamp = s.value("timestamp", 0.0);
        e.steps.push_back(std::move(step));
      }
    }
    if (auto it = j.find("memory_retrieved"); it != j.end() && !it->is_null()) e.memory_retrieved = validate_payload(*it);
    if (auto it = j.find("reward"); it != j.end() && !it->is_null()) {
      if (!it->is_number()) throw SchemaError("/reward", "reward must be a number");
      const double r = it->get<double>();
      if (!(r >= 0.0 && r <= 1.0)) throw SchemaError("/reward", "reward must be in [0, 1]");
      e.reward = r;
    }
    if (auto it = j.find("messages"); it != j.end() && !it->is_null()) {
      for (const auto& m : *it) e.messages.push_back({m.value("role", std::string{}), m.value("content", std::string{})});
    }
    e.artifact_root = j.value("artifact_root", std::string{});
  } catch (const nlohmann::json::exception& ex) {
    throw SchemaError("", std::string("malformed episode: ") + ex.what());
  }
  return e;
}

}  // namespace memosearch
