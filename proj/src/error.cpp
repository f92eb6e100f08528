#include "ratioscope/error.hpp"

namespace ratioscope {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kTooFewSamples: return "TooFewSamples";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kDegenerateData: return "DegenerateData";
    case ErrorKind::kInvalidK: return "InvalidK";
    case ErrorKind::kLineSearchFailure: return "LineSearchFailure";
    case ErrorKind::kNonDecrease: return "NonDecrease";
    case ErrorKind::kUnknownSample: return "UnknownSample";
    case ErrorKind::kNegativeThreshold: return "NegativeThreshold";
    case ErrorKind::kInfeasibleNu: return "InfeasibleNu";
    case ErrorKind::kAllZeroAlphas: return "AllZeroAlphas";
    case ErrorKind::kSingularSystem: return "SingularSystem";
    case ErrorKind::kMaxItersExceeded: return "MaxItersExceeded";
    case ErrorKind::kSingleClass: return "SingleClass";
    case ErrorKind::kInvalidSpec: return "InvalidSpec";
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kIo: return "IoError";
  }
  return "Unknown";
}

bool is_input_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kLineSearchFailure:
    case ErrorKind::kNonDecrease:
    case ErrorKind::kAllZeroAlphas:
    case ErrorKind::kSingularSystem:
    case ErrorKind::kMaxItersExceeded:
      return false;
    default:
      return true;
  }
}

}  // namespace ratioscope
