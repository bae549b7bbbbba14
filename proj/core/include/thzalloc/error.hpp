#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace thz {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based; 0 when no line applies.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Curve fit failed to converge; carries the best residual seen.
class FitError : public Error {
 public:
  FitError(const std::string& what, double best_rmse)
      : Error(what), best_rmse_(best_rmse) {}
  double best_rmse() const noexcept { return best_rmse_; }

 private:
  double best_rmse_;
};

class SignConstraintError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a model or map.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Every frequency of a region exceeds the requested absorption threshold.
class RegionUnusableError : public Error {
 public:
  using Error::Error;
};

/// A sub-band layout spills outside its region.
class LayoutOverflowError : public Error {
 public:
  using Error::Error;
};

class ConvexityConditionError : public Error {
 public:
  ConvexityConditionError(const std::string& what, std::size_t region)
      : Error(what), region_(region) {}
  std::size_t region() const noexcept { return region_; }

 private:
  std::size_t region_;
};

class AssignmentViolationError : public Error {
 public:
  using Error::Error;
};

class SizeGuardError : public Error {
 public:
  using Error::Error;
};

}  // namespace thz
