#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace riskhedge {

enum class ErrorCode {
  malformed_problem,
  numerical_failure,
  parse_error,
  validation_error,
  not_a_parent,
  invalid_spec,
  cone_empty_dual,
  combinatorial_limit,
  maturity_mismatch,
  no_na,
  disagreement,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::malformed_problem: return "MALFORMED_PROBLEM";
    case ErrorCode::numerical_failure: return "NUMERICAL_FAILURE";
    case ErrorCode::parse_error: return "PARSE_ERROR";
    case ErrorCode::validation_error: return "VALIDATION_ERROR";
    case ErrorCode::not_a_parent: return "NOT_A_PARENT";
    case ErrorCode::invalid_spec: return "INVALID_SPEC";
    case ErrorCode::cone_empty_dual: return "CONE_EMPTY_DUAL";
    case ErrorCode::combinatorial_limit: return "COMBINATORIAL_LIMIT";
    case ErrorCode::maturity_mismatch: return "MATURITY_MISMATCH";
    case ErrorCode::no_na: return "NO_NA";
    case ErrorCode::disagreement: return "DISAGREEMENT";
  }
  return "UNKNOWN";
}

/// Exception carrying a machine-readable code plus optional per-item details
/// (e.g. one line per validation violation).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::vector<std::string> details = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message,
                              std::vector<std::string> details = {}) {
  throw Error(code, message, std::move(details));
}

}  // namespace riskhedge
