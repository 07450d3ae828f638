#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace memosearch {

// Insertion-ordered JSON keeps wire messages and journals readable ("method"
// first) and makes serialization deterministic.
using Json = nlohmann::ordered_json;

// Identifier of a node in the generation tree. The root is always 0 and
// children are numbered in insertion order.
struct NodeId {
  std::uint32_t value = 0;

  constexpr auto operator<=>(const NodeId&) const = default;
  static constexpr NodeId root() { return NodeId{0}; }
  bool is_root() const { return value == 0; }
};

std::string to_string(NodeId id);

// Error hierarchy. Every module throws a subclass of Error; the C API maps the
// classes onto the stable exit-code contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A scalar argument outside its mathematical domain (n = 0, beta <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// A JSON document violates a data-model schema; path is a JSON pointer.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& message)
      : Error("schema error at " + (path.empty() ? std::string("/") : path) + ": " + message),
        path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class SecurityError : public Error {
 public:
  using Error::Error;
};

class ResolutionError : public Error {
 public:
  using Error::Error;
};

class SessionError : public Error {
 public:
  using Error::Error;
};

// Operation issued in the wrong session state (update after freeze, ...).
class StateError : public SessionError {
 public:
  using SessionError::SessionError;
};

// Timeout, malformed reply or process exit. The session is now crashed.
class CandidateCrashed : public SessionError {
 public:
  using SessionError::SessionError;
};

// The candidate answered {"ok":false,...}. The session stays usable.
class CandidateCallError : public SessionError {
 public:
  using SessionError::SessionError;
};

// A full evaluation could not produce a score (candidate failed during the
// update phase, or every task was infrastructure-invalid).
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class EvaluationVoid : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

class LifecycleError : public Error {
 public:
  using Error::Error;
};

class AdapterError : public Error {
 public:
  using Error::Error;
};

class JournalError : public Error {
 public:
  using Error::Error;
};

class CorruptionError : public JournalError {
 public:
  using JournalError::JournalError;
};

class SearchError : public Error {
 public:
  using Error::Error;
};

}  // namespace memosearch

template <>
struct std::hash<memosearch::NodeId> {
  std::size_t operator()(memosearch::NodeId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
