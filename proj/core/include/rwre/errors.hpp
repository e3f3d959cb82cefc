#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rwre {

enum class ErrorKind {
  InvalidSpec,
  ConfigError,
  MomentDiverges,
  NoPositiveRoot,
  NotTransient,
  OutOfDomain,
  WindowDegenerate,
  HorizonExceeded,
  PopulationOverflow,
  TiltUnavailable,
  GridUnstable,
  NotStabilized,
  RegimeMismatch,
  ArithmeticSpec,
  TooFewSamples,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Process exit code used by the CLI for an error of this kind:
/// 2 for configuration problems, 3 for regime/window problems, 4 for
/// numerical failures.
int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rwre
