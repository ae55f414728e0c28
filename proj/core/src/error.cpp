#include "weaksqz/error.hpp"

namespace weaksqz {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidFraction: return "InvalidFraction";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::NonPositiveLoss: return "NonPositiveLoss";
    case ErrorCode::ZeroConversion: return "ZeroConversion";
    case ErrorCode::ZeroPump: return "ZeroPump";
    case ErrorCode::SubThermalG2: return "SubThermalG2";
    case ErrorCode::AboveThreshold: return "AboveThreshold";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::UnsortedInput: return "UnsortedInput";
    case ErrorCode::MissingTotals: return "MissingTotals";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::NoCombDetected: return "NoCombDetected";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::MonteCarloFailure: return "MonteCarloFailure";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::UnsortedChannel: return "UnsortedChannel";
    case ErrorCode::TruncatedRecord: return "TruncatedRecord";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::SingularJacobian:
    case ErrorCode::MaxIterations:
    case ErrorCode::NoCombDetected:
    case ErrorCode::DegenerateDesign:
    case ErrorCode::MonteCarloFailure:
      return true;
    default:
      return false;
  }
}

}  // namespace weaksqz
