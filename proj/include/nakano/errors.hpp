#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nakano {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. `offset` is the byte offset of the offending token.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Invalid or incomplete configuration (unknown keys, missing fields, bad shapes).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Evaluation left the domain of a function (log/sqrt of a nonpositive value,
/// unbound variable, point outside a domain).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: nonconvergence, loss of positive definiteness, solver breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace nakano
