#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace heavycomb {

enum class ErrorCode {
  domain,
  infinite_quantile,
  bracket,
  convergence,
  shape,
  method_misuse,
  capacity,
  insufficient_events,
  validation,
  config,
  usage,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Thrown when a Monte Carlo ratio has an empty denominator. Carries the tallies
// so callers can report how far the run was from producing events.
class InsufficientEventsError : public Error {
 public:
  InsufficientEventsError(const std::string& what, std::int64_t combination_rejections,
                          std::int64_t bonferroni_rejections, std::int64_t replications)
      : Error(ErrorCode::insufficient_events, what),
        combination_rejections(combination_rejections),
        bonferroni_rejections(bonferroni_rejections),
        replications(replications) {}

  std::int64_t combination_rejections;
  std::int64_t bonferroni_rejections;
  std::int64_t replications;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace heavycomb
