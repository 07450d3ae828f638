#include "memosearch/reference_candidates.hpp"

#include <algorithm>
#include <cctype>
#include <iterator>
#include <sstream>

namespace memosearch::reference {

namespace {

Json ok_reply() { return Json{{"ok", true}}; }

Json error_reply(const std::string& message) { return Json{{"ok", false}, {"error", message}}; }

Json empty_payload_json() { return Json{{"items", Json::array()}, {"metadata", Json::object()}}; }

std::string format_reward(double r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Json EmptyMemo::retrieve(const Json&) { return empty_payload_json(); }

void KeywordMemo::update(const Json& episode) {
  const Json& init = episode.at("init");
  const std::string text = init.value("task_text", std::string{});
  Entry e;
  e.task_id = episode.value("task_id", std::string{});
  e.tokens = tokenize(text);
  std::sort(e.tokens.begin(), e.tokens.end());
  e.tokens.erase(std::unique(e.tokens.begin(), e.tokens.end()), e.tokens.end());
  const Json& reward = episode.contains("reward") ? episode["reward"] : Json(nullptr);
  const double r = reward.is_number() ? reward.get<double>() : 0.0;
  const auto steps = episode.contains("steps") && episode["steps"].is_array() ? episode["steps"].size() : 0;
  e.summary = "Past task \"" + text + "\" (" + e.task_id + ") " + (r >= 0.5 ? "succeeded" : "failed") + " with reward " +
              format_reward(r) + " after " + std::to_string(steps) + " steps.";
  e.image = nullptr;
  if (init.contains("images") && init["images"].is_array() && !init["images"].empty()) {
    e.image = init["images"][0];
  } else if (episode.contains("steps") && episode["steps"].is_array()) {
    for (const auto& s : episode["steps"]) {
      if (s.contains("observation_images") && !s["observation_images"].empty()) {
        e.image = s["observation_images"][0];
        break;
      }
    }
  }
  entries_.push_back(std::move(e));
}

Json KeywordMemo::retrieve(const Json& task) {
  auto query = tokenize(task.at("init").value("task_text", std::string{}));
  std::sort(query.begin(), query.end());
  query.erase(std::unique(query.begin(), query.end()), query.end());

  struct Scored {
    std::size_t overlap;
    std::size_t index;
  };
  std::vector<Scored> scored;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    std::vector<std::string> common;
    std::set_intersection(query.begin(), query.end(), entries_[i].tokens.begin(), entries_[i].tokens.end(),
                          std::back_inserter(common));
    if (!common.empty()) scored.push_back({common.size(), i});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    return a.index > b.index;
  });
  Json items = Json::array();
  for (std::size_t k = 0; k < scored.size() && k < 2; ++k) {
    const Entry& e = entries_[scored[k].index];
    Json item{{"text", e.summary}};
    if (!e.image.is_null()) item["images"] = Json::array({e.image});
    item["metadata"] = Json{{"memory_id", e.task_id}, {"overlap", scored[k].overlap}};
    items.push_back(std::move(item));
  }
  return Json{{"items", items}, {"metadata", Json::object()}};
}

ProtocolServer::ProtocolServer(std::unique_ptr<MemoProgram> program, Misbehavior misbehavior)
    : program_(std::move(program)), misbehavior_(misbehavior) {}

ServerAction ProtocolServer::handle(const std::string& line) {
  auto reply = [](const Json& j) { return ServerAction{ServerAction::Kind::reply, j.dump(), 0}; };
  Json request;
  try {
    request = Json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    return reply(error_reply(std::string("malformed request: ") + e.what()));
  }
  if (!request.is_object() || !request.contains("method") || !request["method"].is_string())
    return reply(error_reply("malformed request: missing method"));
  const std::string method = request["method"].get<std::string>();
  try {
    if (method == "hello") {
      Json methods = Json::array({"hello", "update", "freeze", "retrieve", "shutdown"});
      if (misbehavior_ == Misbehavior::missing_retrieve) methods = Json::array({"hello", "update", "freeze", "shutdown"});
      const int version = misbehavior_ == Misbehavior::protocol_v2 ? 2 : 1;
      return reply(Json{{"ok", true}, {"protocol", version}, {"methods", methods}});
    }
    if (method == "update") {
      if (misbehavior_ == Misbehavior::hang_on_update) return {ServerAction::Kind::hang, {}, 0};
      if (misbehavior_ == Misbehavior::crash_on_update) return {ServerAction::Kind::exit, {}, 3};
      if (misbehavior_ == Misbehavior::non_json) return {ServerAction::Kind::reply, "this is not json", 0};
      if (frozen_) return reply(error_reply("memory is frozen"));
      program_->update(request.at("episode"));
      return reply(ok_reply());
    }
    if (method == "freeze") {
      frozen_ = true;
      return reply(ok_reply());
    }
    if (method == "retrieve") {
      if (misbehavior_ == Misbehavior::missing_retrieve) return reply(error_reply("unknown method: retrieve"));
      Json payload;
      if (misbehavior_ == Misbehavior::bad_schema) {
        payload = Json{{"items", Json{{"x", 1}}}};
      } else if (misbehavior_ == Misbehavior::too_many_images) {
        Json images = Json::array();
        for (int i = 1; i <= 3; ++i) images.push_back(Json{{"kind", "path"}, {"value", "shots/" + std::to_string(i) + ".png"}});
        payload = Json{{"items", Json::array({Json{{"text", "look"}, {"images", images}}})}, {"metadata", Json::object()}};
      } else {
        payload = program_->retrieve(request.at("task"));
      }
      return reply(Json{{"ok", true}, {"payload", payload}});
    }
    if (method == "shutdown") {
      return reply(ok_reply());
    }
  } catch (const std::exception& e) {
    return reply(error_reply(std::string("candidate error: ") + e.what()));
  }
  return reply(error_reply("unknown method: " + method));
}

std::vector<std::string> candidate_names() {
  return {"empty",           "keyword",         "bad-schema",  "missing-retrieve", "hang-update",
          "crash-update",    "too-many-images", "protocol2",   "nonjson"};
}

std::unique_ptr<ProtocolServer> make_server(const std::string& name) {
  if (name == "empty") return std::make_unique<ProtocolServer>(std::make_unique<EmptyMemo>());
  if (name == "keyword") return std::make_unique<ProtocolServer>(std::make_unique<KeywordMemo>());
  const std::pair<const char*, Misbehavior> broken[] = {
      {"bad-schema", Misbehavior::bad_schema},       {"missing-retrieve", Misbehavior::missing_retrieve},
      {"hang-update", Misbehavior::hang_on_update},  {"crash-update", Misbehavior::crash_on_update},
      {"too-many-images", Misbehavior::too_many_images}, {"protocol2", Misbehavior::protocol_v2},
      {"nonjson", Misbehavior::non_json}};
  for (const auto& [n, m] : broken) {
    if (name == n) return std::make_unique<ProtocolServer>(std::make_unique<EmptyMemo>(), m);
  }
  throw Error("unknown reference candidate '" + name + "'");
}

}  // namespace memosearch::reference
