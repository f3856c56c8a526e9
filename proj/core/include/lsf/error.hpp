#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lsf {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnsupportedFormatError : public Error {
 public:
  using Error::Error;
};

/// Truncated or corrupt binary input. `offset()` is the byte position where decoding failed.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : Error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Precondition on an argument violated.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input data missing or inconsistent (absent records, missing artifacts).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered during numeric evaluation.
class ComputationError : public Error {
 public:
  using Error::Error;
};

/// A metric is mathematically undefined for the given labels (e.g. no positives).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace lsf
