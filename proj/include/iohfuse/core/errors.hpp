#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace iohfuse {

/// Malformed file content; carries the 1-based line (0 when not line-based).
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Transient failure; the caller may retry.
class RetryableError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Configuration failed validation; lists every violation found.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid configuration:";
    for (const auto& e : v) s += "\n  - " + e;
    return s;
  }
  std::vector<std::string> violations_;
};

/// A pipeline stage is missing an artifact produced by an earlier command.
class PrerequisiteError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace iohfuse
