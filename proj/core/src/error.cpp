#include "axisforge/error.hpp"

namespace axisforge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::DegenerateAxis: return "DegenerateAxis";
    case ErrorCode::EmptyChannel: return "EmptyChannel";
    case ErrorCode::DegenerateChannel: return "DegenerateChannel";
    case ErrorCode::NoIntersection: return "NoIntersection";
    case ErrorCode::VanishingMass: return "VanishingMass";
    case ErrorCode::NoValidSolution: return "NoValidSolution";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::AllCandidatesRejected: return "AllCandidatesRejected";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::InvalidSigma: return "InvalidSigma";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::IncompatibleCheckpoint: return "IncompatibleCheckpoint";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DegenerateSamplingExhausted: return "DegenerateSamplingExhausted";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
  }
  return "Unknown";
}

static std::string format_message(ErrorCode code, const std::string& message, int index) {
  std::string out(to_string(code));
  if (index >= 0) out += "(" + std::to_string(index) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

Error::Error(ErrorCode code, const std::string& message, int index)
    : std::runtime_error(format_message(code, message, index)), code_(code), index_(index) {}

}  // namespace axisforge
