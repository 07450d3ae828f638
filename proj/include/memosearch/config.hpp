#pragma once

#include <chrono>
#include <cstdint>
#include <optional>

#include "memosearch/common.hpp"

namespace memosearch {

// Every scalar of the search. Defaults are the values used for memory-design
// search in the reference experiments.
struct SearchConfig {
  int search_steps = 20;            // T
  double eval_confidence = 0.2;     // c_e
  double gen_confidence = 0.2;      // c_g
  double prior_strength = 0.5;      // rho
  double prior_pseudocount = 1.0;   // beta
  int min_width = 2;                // B
  int repair_budget = 3;            // L
  // Confidence used by the final LCB selection; unset means c_e.
  std::optional<double> selection_confidence;

  int quick_test_tasks = 5;
  int payload_char_budget = 50'000;
  int payload_image_budget = 2;
  int eval_concurrency = 8;
  std::uint64_t rng_seed = 0;

  // Reflection evidence limits.
  int meta_success_samples = 2;
  int meta_failure_samples = 2;
  int meta_observation_chars = 50'000;
  int meta_images_per_episode = 4;
  int meta_memory_chars = 20'000;
  int meta_memory_images = 2;

  std::chrono::milliseconds per_call_timeout{120'000};

  double lcb_confidence() const { return selection_confidence.value_or(eval_confidence); }

  // Throws ConfigError naming the first offending field.
  void validate() const;

  // Fields that change search results; eval_concurrency and timeouts are
  // excluded so a run may be resumed on a different machine.
  bool same_search_as(const SearchConfig& other) const;

  friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

Json to_json(const SearchConfig& config);
// Missing keys keep their defaults; unknown keys are rejected. `prefix` is
// used for field-level error messages.
SearchConfig search_config_from_json(const Json& j, const std::string& prefix = "search");

}  // namespace memosearch
