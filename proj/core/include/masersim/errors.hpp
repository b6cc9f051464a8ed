#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace masersim {

// Numeric failure: integrator breakdown, singular systems, fits that cannot
// proceed. The CLI maps this family to exit code 3.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integration failure carrying the time at which the step size underflowed.
class IntegrationError : public ComputationError {
 public:
  IntegrationError(const std::string& what, double t_fail_s)
      : ComputationError(what), t_fail_s_(t_fail_s) {}
  double failure_time_s() const noexcept { return t_fail_s_; }

 private:
  double t_fail_s_;
};

// File-system and data-file failures. The CLI maps this family to exit
// code 4 (config files are the exception: their problems are validation,
// exit code 2, and the CLI remaps them at the call site).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input; carries the 1-based line number.
class ParseError : public IoError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : IoError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct ValidationIssue {
  std::string field;
  std::string message;
};

// Aggregated config validation failure: every offending field is listed,
// not just the first.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : std::invalid_argument(join(issues)), issues_(std::move(issues)) {}
  const std::vector<ValidationIssue>& issues() const noexcept {
    return issues_;
  }

 private:
  static std::string join(const std::vector<ValidationIssue>& issues) {
    std::string s;
    for (const auto& i : issues) {
      if (!s.empty()) s += "; ";
      s += i.field;
      s += ": ";
      s += i.message;
    }
    return s.empty() ? std::string("validation failed") : s;
  }

  std::vector<ValidationIssue> issues_;
};

}  // namespace masersim
