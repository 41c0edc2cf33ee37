#pragma once

#include <stdexcept>
#include <string>

namespace spamlab {

/// Precondition on a numeric domain was violated (out-of-range svid,
/// undersampled buffer, mismatched rates).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Text input could not be parsed. Carries the offending line when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line = 0);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Scenario or attack configuration is inconsistent.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was called with an argument that breaks its contract.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The timeline cannot support the requested classification.
class ClassificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spamlab
