#include "rwre/errors.hpp"

namespace rwre {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::MomentDiverges: return "MomentDiverges";
    case ErrorKind::NoPositiveRoot: return "NoPositiveRoot";
    case ErrorKind::NotTransient: return "NotTransient";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::WindowDegenerate: return "WindowDegenerate";
    case ErrorKind::HorizonExceeded: return "HorizonExceeded";
    case ErrorKind::PopulationOverflow: return "PopulationOverflow";
    case ErrorKind::TiltUnavailable: return "TiltUnavailable";
    case ErrorKind::GridUnstable: return "GridUnstable";
    case ErrorKind::NotStabilized: return "NotStabilized";
    case ErrorKind::RegimeMismatch: return "RegimeMismatch";
    case ErrorKind::ArithmeticSpec: return "ArithmeticSpec";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidSpec:
    case ErrorKind::ConfigError:
      return 2;
    case ErrorKind::NoPositiveRoot:
    case ErrorKind::NotTransient:
    case ErrorKind::OutOfDomain:
    case ErrorKind::WindowDegenerate:
    case ErrorKind::RegimeMismatch:
    case ErrorKind::ArithmeticSpec:
      return 3;
    default:
      return 4;
  }
}

}  // namespace rwre
