#pragma once

#include <stdexcept>
#include <string>

namespace blowuplab {

enum class ErrorCode {
  InvalidScenario,
  InvalidArgument,
  DomainError,
  EndpointNonzero,
  NonMonotoneTimes,
  NonpositiveF,
  OrderingViolated,
  ZeroVorticity,
  ParseError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::EndpointNonzero: return "EndpointNonzero";
    case ErrorCode::NonMonotoneTimes: return "NonMonotoneTimes";
    case ErrorCode::NonpositiveF: return "NonpositiveF";
    case ErrorCode::OrderingViolated: return "OrderingViolated";
    case ErrorCode::ZeroVorticity: return "ZeroVorticity";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

// Single exception type for the library; `code()` tells callers which
// contract was broken.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace blowuplab
