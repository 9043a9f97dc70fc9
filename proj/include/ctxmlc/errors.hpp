#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctxmlc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based; 0 means "not tied to a line".
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(line == 0 ? message : "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid configuration values or inconsistent shapes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values in losses, parameters or gradients.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctxmlc
