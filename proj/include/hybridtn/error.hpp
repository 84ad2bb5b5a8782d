#pragma once

#include <stdexcept>
#include <string>

namespace hybridtn {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or record. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Inconsistent configuration: unknown labels, bad regexes, missing templates.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Data that parses but violates an invariant (span bounds, overlaps, shapes).
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace hybridtn
