#pragma once

#include <stdexcept>
#include <string>

namespace metarule {

// Base of every exception raised by the library. kind() is a stable class
// name used by the CLI for error reporting and exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

// A token placement or rule that violates the expression grammar.
class GrammarError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "GrammarError"; }
};

// Caller broke a precondition (incomplete tree, exhausted horizon, ...).
class ContractError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ContractError"; }
};

class DimensionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "DimensionError"; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "NumericError"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "IoError"; }
};

class ParseError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ParseError"; }
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  const char* kind() const noexcept override { return "ConfigError"; }
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace metarule
