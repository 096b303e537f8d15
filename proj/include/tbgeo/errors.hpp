#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tbg {

// Expression text failed to parse. `offset` is the byte offset of the first
// character that could not be consumed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, size_t offset)
      : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  size_t offset() const { return offset_; }

 private:
  size_t offset_;
};

// Numeric evaluation failed: unbound variable or a domain error (log of a
// non-positive value, division by zero, ...). Carries the offending
// subexpression in rendered form.
class EvalError : public std::runtime_error {
 public:
  EvalError(const std::string& what, std::string subexpr)
      : std::runtime_error(what + " in '" + subexpr + "'"), subexpr_(std::move(subexpr)) {}
  const std::string& subexpr() const { return subexpr_; }

 private:
  std::string subexpr_;
};

// A manifold description violated the schema or is mathematically unusable
// (wrong shapes, asymmetric metric, bad domain, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The metric matrix was numerically singular at a requested point.
class SingularMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tbg
