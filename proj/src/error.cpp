#include "ionkink/error.hpp"

namespace ionkink {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Configuration: return "ConfigurationError";
    case ErrorKind::CoulombSingularity: return "CoulombSingularity";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SaddlePoint: return "SaddlePoint";
    case ErrorKind::UnsupportedRegime: return "UnsupportedRegime";
    case ErrorKind::UnstableEquilibrium: return "UnstableEquilibrium";
    case ErrorKind::NumericalBlowup: return "NumericalBlowup";
    case ErrorKind::NotSettled: return "NotSettled";
    case ErrorKind::PathCollapse: return "PathCollapse";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorKind::TooFewEscapes: return "TooFewEscapes";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::PoorFit: return "PoorFit";
    case ErrorKind::FitDiverged: return "FitDiverged";
    case ErrorKind::Extrapolation: return "Extrapolation";
    case ErrorKind::Interrupted: return "Interrupted";
  }
  return "Error";
}

int Error::exit_code() const noexcept {
  switch (kind_) {
    case ErrorKind::Configuration:
      return 3;
    case ErrorKind::InsufficientData:
    case ErrorKind::EmptyEnsemble:
    case ErrorKind::TooFewEscapes:
    case ErrorKind::TooFewPoints:
      return 4;
    case ErrorKind::Interrupted:
      return 130;
    default:
      return 2;
  }
}

}  // namespace ionkink
