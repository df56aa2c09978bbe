#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ebmix {

// Every library error derives from Error and carries a short category tag
// that the command-line tool prints as `ERROR <category>: ...`.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

// Caller broke a precondition (bad argument, family mismatch, empty input).
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& what) : Error("contract", what) {}
};

// A density, likelihood or derivative came out non-finite.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

class UnsupportedOperation : public Error {
 public:
  explicit UnsupportedOperation(const std::string& what) : Error("unsupported", what) {}
};

// All EM restarts failed.
class FittingError : public Error {
 public:
  explicit FittingError(const std::string& what) : Error("fitting", what) {}
};

// The requested curve never drops below q inside the search bracket.
class NoRejectionRegion : public Error {
 public:
  explicit NoRejectionRegion(const std::string& what) : Error("no-rejection-region", what) {}
};

class DegenerateRange : public Error {
 public:
  explicit DegenerateRange(const std::string& what) : Error("degenerate-range", what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("parse", "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

}  // namespace ebmix
