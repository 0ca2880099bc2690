#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace jitterlab {

enum class ErrorKind {
  invalid_dimension,
  invalid_parameter,
  out_of_regime,
  unbounded_below,
  evaluation,
  degenerate_input,
  degenerate_regime,
  attack_divergence,
  training_divergence,
  config,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_dimension: return "invalid-dimension";
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::out_of_regime: return "out-of-regime";
    case ErrorKind::unbounded_below: return "unbounded-below";
    case ErrorKind::evaluation: return "evaluation";
    case ErrorKind::degenerate_input: return "degenerate-input";
    case ErrorKind::degenerate_regime: return "degenerate-regime";
    case ErrorKind::attack_divergence: return "attack-divergence";
    case ErrorKind::training_divergence: return "training-divergence";
    case ErrorKind::config: return "config-error";
    case ErrorKind::io: return "io-error";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Config errors name the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& message)
      : Error(ErrorKind::config, message), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace jitterlab
