#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ionkink {

enum class ErrorKind {
  Configuration,
  CoulombSingularity,
  NonFinite,
  NoConvergence,
  SaddlePoint,
  UnsupportedRegime,
  UnstableEquilibrium,
  NumericalBlowup,
  NotSettled,
  PathCollapse,
  InsufficientData,
  EmptyEnsemble,
  TooFewEscapes,
  TooFewPoints,
  PoorFit,
  FitDiverged,
  Extrapolation,
  Interrupted,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind is
/// what callers branch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Numerical failures exit with 2, configuration errors with 3,
  /// statistical shortfalls with 4 and interrupted runs with 130.
  int exit_code() const noexcept;

 private:
  ErrorKind kind_;
};

}  // namespace ionkink
