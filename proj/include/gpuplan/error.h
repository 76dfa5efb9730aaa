#ifndef GPUPLAN_ERROR_H_
#define GPUPLAN_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace gpuplan {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidGraph,
  kCycle,
  kOutOfRange,
  kCorruptBuffer,
  kInfeasible,
  kPlanViolation,
  kUnknownModel,
  kTooLarge,
  kUnsupported,
  kParse,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// Domain failure. The CLI maps these to exit status 1 and a JSON
// {error, detail} record on stderr.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gpuplan

#endif  // GPUPLAN_ERROR_H_
