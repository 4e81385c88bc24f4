#pragma once

#include <stdexcept>
#include <string>

namespace cosmic {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Caller violated an API precondition (bad index, empty input, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared in a computed value.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. line() is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that breaks a dataset or checkpoint invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace cosmic
