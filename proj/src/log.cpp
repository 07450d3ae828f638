#include "memosearch/log.hpp"

#include <algorithm>
#include <mutex>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace memosearch::log {
namespace {

std::mutex& secrets_mutex() {
  static std::mutex m;
  return m;
}

std::vector<std::string>& secrets() {
  static std::vector<std::string> s;
  return s;
}

}  // namespace

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto existing = spdlog::get("memosearch");
    if (existing) return existing;
    auto l = spdlog::stderr_color_mt("memosearch");
    l->set_pattern("[%l] %v");
    return l;
  }();
  return instance;
}

void register_secret(std::string secret) {
  if (secret.empty()) return;
  std::lock_guard lock(secrets_mutex());
  auto& s = secrets();
  if (std::find(s.begin(), s.end(), secret) == s.end()) s.push_back(std::move(secret));
  // Longest first so a secret containing another is masked whole.
  std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
}

void clear_secrets() {
  std::lock_guard lock(secrets_mutex());
  secrets().clear();
}

std::string redact(std::string_view text) {
  std::string out(text);
  std::lock_guard lock(secrets_mutex());
  for (const auto& secret : secrets()) {
    std::size_t pos = 0;
    while ((pos = out.find(secret, pos)) != std::string::npos) {
      out.replace(pos, secret.size(), "***");
      pos += 3;
    }
  }
  return out;
}

void info(std::string_view message) { logger()->info("{}", redact(message)); }
void warn(std::string_view message) { logger()->warn("{}", redact(message)); }
void error(std::string_view message) { logger()->error("{}", redact(message)); }

}  // namespace memosearch::log
