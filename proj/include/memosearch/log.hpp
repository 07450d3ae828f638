#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <spdlog/spdlog.h>

namespace memosearch::log {

// Shared logger ("memosearch"), writing to stderr unless a test swaps sinks.
std::shared_ptr<spdlog::logger> logger();

// Registered secrets are replaced by "***" in every message that goes through
// this module, and in anything passed to redact().
void register_secret(std::string secret);
void clear_secrets();
std::string redact(std::string_view text);

void info(std::string_view message);
void warn(std::string_view message);
void error(std::string_view message);

}  // namespace memosearch::log
