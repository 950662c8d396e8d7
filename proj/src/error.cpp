#include "embreg/error.hpp"

namespace embreg {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidCoordinate: return "InvalidCoordinate";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidStep: return "InvalidStep";
    case ErrorKind::DegenerateMatches: return "DegenerateMatches";
    case ErrorKind::SingularAffine: return "SingularAffine";
    case ErrorKind::EmptyMatchSet: return "EmptyMatchSet";
    case ErrorKind::NumericalDivergence: return "NumericalDivergence";
    case ErrorKind::EmptyOverlap: return "EmptyOverlap";
    case ErrorKind::DegenerateIntensity: return "DegenerateIntensity";
    case ErrorKind::PairingError: return "PairingError";
    case ErrorKind::NotVol1: return "NotVol1";
    case ErrorKind::CorruptContainer: return "CorruptContainer";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, std::string(to_string(kind)) + ": " + message);
}

int exit_code(ErrorKind kind) {
  if (kind == ErrorKind::InvalidConfig) return 2;
  return kind == ErrorKind::NumericalDivergence ? 4 : 3;
}

}  // namespace embreg
