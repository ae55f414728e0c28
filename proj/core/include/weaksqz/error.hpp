#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace weaksqz {

enum class ErrorCode {
  // parameter / domain validation
  InvalidFraction,
  InvalidParameter,
  NonPositiveLoss,
  ZeroConversion,
  ZeroPump,
  SubThermalG2,
  AboveThreshold,
  NonPositiveVariance,
  ConfigInvalid,
  // stream and histogram handling
  EmptyStream,
  UnsortedInput,
  MissingTotals,
  NotNormalized,
  // fitting
  SingularJacobian,
  MaxIterations,
  NoCombDetected,
  DegenerateDesign,
  MonteCarloFailure,
  // file formats and IO
  BadMagic,
  UnsupportedVersion,
  UnsortedChannel,
  TruncatedRecord,
  BadFormat,
  IoFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for codes that describe a numerical failure rather than bad input.
bool is_numerical(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by run_pipeline; carries the name of the stage that failed.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), "stage '" + stage + "': " + cause.what()), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace weaksqz
