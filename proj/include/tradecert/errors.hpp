#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tradecert {

/// Argument outside the mathematical domain of an operation (negative value,
/// beta outside (0,1), a diverging error bound, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Well-formed input that violates a representation invariant. The message
/// names the violated invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed textual input. `position()` is the byte offset reported by the
/// parser (0 when unknown).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// A computation would exceed a configured memory or size budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable, corrupt or mismatched checkpoint file.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tradecert
