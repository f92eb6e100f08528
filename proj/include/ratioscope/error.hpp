#pragma once

#include <stdexcept>
#include <string>

namespace ratioscope {

enum class ErrorKind {
  kDimensionMismatch,
  kTooFewSamples,
  kInvalidArgument,
  kDegenerateData,
  kInvalidK,
  kLineSearchFailure,
  kNonDecrease,
  kUnknownSample,
  kNegativeThreshold,
  kInfeasibleNu,
  kAllZeroAlphas,
  kSingularSystem,
  kMaxItersExceeded,
  kSingleClass,
  kInvalidSpec,
  kParse,
  kIo,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a machine-readable kind so the
// CLI can map it onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// True for errors caused by bad user input rather than a numerical failure.
bool is_input_error(ErrorKind kind);

}  // namespace ratioscope
