#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace l2d {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two distributions (or a distribution and a label map) disagree on the
/// number of classes.
class ClassCountError : public Error {
 public:
  ClassCountError(std::size_t expected, std::size_t actual, const std::string& where = {})
      : Error("class count mismatch" + (where.empty() ? std::string{} : " in " + where) +
              ": expected " + std::to_string(expected) + ", got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

/// KL(p || m) is undefined: p puts mass where m has none.
class ContinuityError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented precondition or type invariant.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based, 0 when not line oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + (line ? ":" + std::to_string(line) : std::string{}) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid run configuration (CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Failure talking to an external provider (CLI exit code 2).
class ProviderError : public Error {
 public:
  using Error::Error;
};

/// Non-success HTTP status after all retries.
class RequestError : public ProviderError {
 public:
  RequestError(int status, std::string body_excerpt, const std::string& what)
      : ProviderError(what), status_(status), body_(std::move(body_excerpt)) {}

  int status() const noexcept { return status_; }
  const std::string& body_excerpt() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

/// The server answered, but with a payload that breaks the wire contract.
class ProtocolError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

}  // namespace l2d
