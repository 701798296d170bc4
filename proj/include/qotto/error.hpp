#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qotto {

enum class ErrorKind {
  domain,        // argument outside the mathematical domain of an operation
  construction,  // inconsistent object construction (sizes, shapes)
  dimension,     // mismatched level counts between operands
  convergence,   // iterative solver failed
  parse,         // malformed input document
  validation,    // well-formed input with invalid values
  io,            // filesystem failure
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::construction: return "construction";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Process exit code used by the command-line tool for each category.
constexpr int exit_code(ErrorKind kind) noexcept {
  return 2 + static_cast<int>(kind);
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when every start of a nonlinear fit fails; carries the best residual seen.
class FitError : public Error {
 public:
  FitError(const std::string& what, double best_residual)
      : Error(ErrorKind::convergence, what), best_residual_(best_residual) {}

  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool ok, ErrorKind kind, const char* what) {
  if (!ok) throw Error(kind, what);
}

}  // namespace detail
}  // namespace qotto
