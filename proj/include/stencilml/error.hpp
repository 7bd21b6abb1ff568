#pragma once

#include <stdexcept>
#include <string>

namespace stencilml {

/// Broad failure categories. The CLI maps them to process exit codes.
enum class ErrorKind {
  Usage = 2,
  Data = 3,
  Numerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Violated precondition of a public operation (wrong lengths, sizes out of range).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class InvalidDomainError : public Error {
 public:
  explicit InvalidDomainError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class InsufficientCandidatesError : public Error {
 public:
  explicit InsufficientCandidatesError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class MissingBordersError : public Error {
 public:
  explicit MissingBordersError(int size)
      : Error(ErrorKind::Data, "no quartile borders for stencil size " + std::to_string(size)),
        size_(size) {}
  int size() const noexcept { return size_; }

 private:
  int size_;
};

class ZeroRadiusError : public Error {
 public:
  ZeroRadiusError() : Error(ErrorKind::Numerical, "stencil has zero radius (all nodes coincide with the center)") {}
};

/// Raised when the augmented RBF system is singular or too ill-conditioned to trust.
class ConditioningError : public Error {
 public:
  explicit ConditioningError(double condition_estimate);
  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// Malformed input file. `line` is 1-based, 0 when the problem is not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(ErrorKind::Data, source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace stencilml
