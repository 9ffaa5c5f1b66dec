#ifndef HYPERNB_ERROR_HPP
#define HYPERNB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace hypernb {

enum class Errc {
  InvalidInput,
  AssumptionViolation,
  InvalidTensor,
  DegenerateModel,
  IndexOutOfRange,
  ProbabilityOverflow,
  PopulationCap,
  DimensionMismatch,
  PoleError,
  SingularMatrix,
  NoConvergence,
  ComplexOutlier,
  DepthTooLarge,
  ZeroVector,
  InvalidThreshold,
  LengthMismatch,
  NotApplicable,
  NoImprovement,
  DepthExceeded,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::AssumptionViolation: return "AssumptionViolation";
    case Errc::InvalidTensor: return "InvalidTensor";
    case Errc::DegenerateModel: return "DegenerateModel";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::ProbabilityOverflow: return "ProbabilityOverflow";
    case Errc::PopulationCap: return "PopulationCap";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::PoleError: return "PoleError";
    case Errc::SingularMatrix: return "SingularMatrix";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::ComplexOutlier: return "ComplexOutlier";
    case Errc::DepthTooLarge: return "DepthTooLarge";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::InvalidThreshold: return "InvalidThreshold";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NotApplicable: return "NotApplicable";
    case Errc::NoImprovement: return "NoImprovement";
    case Errc::DepthExceeded: return "DepthExceeded";
  }
  return "Unknown";
}

// Process exit code for the CLI: 1 input, 2 numerical, 3 regime.
inline int errc_exit_code(Errc c) {
  switch (c) {
    case Errc::PoleError:
    case Errc::SingularMatrix:
    case Errc::NoConvergence:
    case Errc::ComplexOutlier:
    case Errc::ZeroVector:
    case Errc::NoImprovement:
    case Errc::PopulationCap:
      return 2;
    case Errc::DegenerateModel:
    case Errc::DepthTooLarge:
    case Errc::AssumptionViolation:
      return 3;
    default:
      return 1;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace hypernb

#endif
