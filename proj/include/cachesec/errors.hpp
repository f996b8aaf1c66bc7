#pragma once

#include <atomic>
#include <iostream>
#include <stdexcept>
#include <string>

namespace cachesec {

/// Invalid or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed optimization problem (dimension mismatch and the like).
class InvalidProblem : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A rank-one or KKT certificate did not hold within tolerance.
class CertificateFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Enumeration requested above its size guard.
class InstanceTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::atomic<bool>& warnings_enabled() {
  static std::atomic<bool> enabled{true};
  return enabled;
}

inline void log_warning(const std::string& msg) {
  if (warnings_enabled().load(std::memory_order_relaxed)) std::clog << "warning: " << msg << '\n';
}

}  // namespace cachesec
