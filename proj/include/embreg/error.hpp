#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace embreg {

enum class ErrorKind {
  InvalidCoordinate,
  ShapeMismatch,
  DimensionMismatch,
  InvalidStep,
  DegenerateMatches,
  SingularAffine,
  EmptyMatchSet,
  NumericalDivergence,
  EmptyOverlap,
  DegenerateIntensity,
  PairingError,
  NotVol1,
  CorruptContainer,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

// Process exit code for the CLI: 2 for bad configuration, 3 for data errors,
// 4 for divergence.
int exit_code(ErrorKind kind);

}  // namespace embreg
