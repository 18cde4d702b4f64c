#ifndef SPAG_ERRORS_HPP
#define SPAG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace spag {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input: unreadable file, invalid JSON, missing fields.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Structurally valid input that violates a semantic requirement
// (rows not summing to one, rewards out of range, shape mismatches).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// A numerical routine could not certify its own result: solver iteration
// blow-up, a returned point failing re-verification, degenerate geometry
// that resisted classification.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// An enumeration oracle refused to run because its size estimate
// exceeded the caller's budget.
class BudgetExceeded : public Error {
 public:
  BudgetExceeded(const std::string& msg, double estimate)
      : Error(msg), estimate_(estimate) {}
  double estimate() const { return estimate_; }

 private:
  double estimate_;
};

// The constraint system admits no feasible target at all.
class EmptyInducibleSet : public Error {
 public:
  explicit EmptyInducibleSet(const std::string& msg) : Error(msg) {}
};

}  // namespace spag

#endif  // SPAG_ERRORS_HPP
