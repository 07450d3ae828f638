#include "memosearch/config.hpp"

#include <cmath>
#include <set>

namespace memosearch {

void SearchConfig::validate() const {
  auto require = [](bool ok, const char* field, const char* message) {
    if (!ok) throw ConfigError(std::string("search.") + field, message);
  };
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  require(search_steps >= 1, "search_steps", "must be >= 1");
  require(finite_nonneg(eval_confidence), "eval_confidence", "must be a finite number >= 0");
  require(finite_nonneg(gen_confidence), "gen_confidence", "must be a finite number >= 0");
  require(finite_nonneg(prior_strength), "prior_strength", "must be a finite number >= 0");
  require(std::isfinite(prior_pseudocount) && prior_pseudocount > 0.0, "prior_pseudocount", "must be > 0");
  require(min_width >= 1, "min_width", "must be >= 1");
  require(repair_budget >= 0, "repair_budget", "must be >= 0");
  require(!selection_confidence || finite_nonneg(*selection_confidence), "selection_confidence",
          "must be a finite number >= 0");
  require(quick_test_tasks >= 1, "quick_test_tasks", "must be >= 1");
  require(payload_char_budget >= 1, "payload_char_budget", "must be >= 1");
  require(payload_image_budget >= 0, "payload_image_budget", "must be >= 0");
  require(eval_concurrency >= 1, "eval_concurrency", "must be >= 1");
  require(meta_success_samples >= 0, "meta_success_samples", "must be >= 0");
  require(meta_failure_samples >= 0, "meta_failure_samples", "must be >= 0");
  require(meta_observation_chars >= 1, "meta_observation_chars", "must be >= 1");
  require(meta_images_per_episode >= 0, "meta_images_per_episode", "must be >= 0");
  require(meta_memory_chars >= 1, "meta_memory_chars", "must be >= 1");
  require(meta_memory_images >= 0, "meta_memory_images", "must be >= 0");
  require(per_call_timeout.count() > 0, "per_call_timeout_ms", "must be > 0");
}

bool SearchConfig::same_search_as(const SearchConfig& other) const {
  SearchConfig a = *this;
  SearchConfig b = other;
  a.eval_concurrency = b.eval_concurrency = 1;
  a.per_call_timeout = b.per_call_timeout = std::chrono::milliseconds{1};
  return a == b;
}

Json to_json(const SearchConfig& c) {
  Json j;
  j["search_steps"] = c.search_steps;
  j["eval_confidence"] = c.eval_confidence;
  j["gen_confidence"] = c.gen_confidence;
  j["prior_strength"] = c.prior_strength;
  j["prior_pseudocount"] = c.prior_pseudocount;
  j["min_width"] = c.min_width;
  j["repair_budget"] = c.repair_budget;
  j["selection_confidence"] = c.selection_confidence ? Json(*c.selection_confidence) : Json(nullptr);
  j["quick_test_tasks"] = c.quick_test_tasks;
  j["payload_char_budget"] = c.payload_char_budget;
  j["payload_image_budget"] = c.payload_image_budget;
  j["eval_concurrency"] = c.eval_concurrency;
  j["rng_seed"] = c.rng_seed;
  j["meta_success_samples"] = c.meta_success_samples;
  j["meta_failure_samples"] = c.meta_failure_samples;
  j["meta_observation_chars"] = c.meta_observation_chars;
  j["meta_images_per_episode"] = c.meta_images_per_episode;
  j["meta_memory_chars"] = c.meta_memory_chars;
  j["meta_memory_images"] = c.meta_memory_images;
  j["per_call_timeout_ms"] = c.per_call_timeout.count();
  return j;
}

namespace {

template <typename T>
void read_field(const Json& j, const char* key, T& out, const std::string& prefix) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError(prefix + "." + key, "expected a number");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError(prefix + "." + key, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->is_number_integer() && !it->is_number_unsigned() && it->get<std::int64_t>() < 0)
          throw ConfigError(prefix + "." + key, "expected a nonnegative integer");
      }
    }
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(prefix + "." + key, e.what());
  }
}

}  // namespace

SearchConfig search_config_from_json(const Json& j, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix, "expected an object");
  static const std::set<std::string> known = {
      "search_steps", "eval_confidence", "gen_confidence", "prior_strength", "prior_pseudocount",
      "min_width", "repair_budget", "selection_confidence", "quick_test_tasks", "payload_char_budget",
      "payload_image_budget", "eval_concurrency", "rng_seed", "meta_success_samples",
      "meta_failure_samples", "meta_observation_chars", "meta_images_per_episode", "meta_memory_chars",
      "meta_memory_images", "per_call_timeout_ms"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError(prefix + "." + key, "unknown field");
  }
  SearchConfig c;
  read_field(j, "search_steps", c.search_steps, prefix);
  read_field(j, "eval_confidence", c.eval_confidence, prefix);
  read_field(j, "gen_confidence", c.gen_confidence, prefix);
  read_field(j, "prior_strength", c.prior_strength, prefix);
  read_field(j, "prior_pseudocount", c.prior_pseudocount, prefix);
  read_field(j, "min_width", c.min_width, prefix);
  read_field(j, "repair_budget", c.repair_budget, prefix);
  if (auto it = j.find("selection_confidence"); it != j.end() && !it->is_null()) {
    double v = 0;
    read_field(j, "selection_confidence", v, prefix);
    c.selection_confidence = v;
  }
  read_field(j, "quick_test_tasks", c.quick_test_tasks, prefix);
  read_field(j, "payload_char_budget", c.payload_char_budget, prefix);
  read_field(j, "payload_image_budget", c.payload_image_budget, prefix);
  read_field(j, "eval_concurrency", c.eval_concurrency, prefix);
  read_field(j, "rng_seed", c.rng_seed, prefix);
  read_field(j, "meta_success_samples", c.meta_success_samples, prefix);
  read_field(j, "meta_failure_samples", c.meta_failure_samples, prefix);
  read_field(j, "meta_observation_chars", c.meta_observation_chars, prefix);
  read_field(j, "meta_images_per_episode", c.meta_images_per_episode, prefix);
  read_field(j, "meta_memory_chars", c.meta_memory_chars, prefix);
  read_field(j, "meta_memory_images", c.meta_memory_images, prefix);
  std::int64_t timeout_ms = c.per_call_timeout.count();
  read_field(j, "per_call_timeout_ms", timeout_ms, prefix);
  c.per_call_timeout = std::chrono::milliseconds{timeout_ms};
  try {
    c.validate();
  } catch (const ConfigError& e) {
    // Re-prefix so nested configs report their full path.
    std::string field = e.field();
    if (prefix != "search" && field.rfind("search.", 0) == 0) field = prefix + field.substr(6);
    throw ConfigError(field, std::string(e.what()).substr(e.field().size() + 2));
  }
  return c;
}

}  // namespace memosearch
