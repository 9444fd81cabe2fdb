#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace axisforge {

enum class ErrorCode {
  InvalidArgument,
  NonPositiveDepth,
  DegenerateAxis,
  EmptyChannel,
  DegenerateChannel,
  NoIntersection,
  VanishingMass,
  NoValidSolution,
  IllConditioned,
  AllCandidatesRejected,
  InvalidSchedule,
  InvalidSigma,
  DivergedLoss,
  IncompatibleCheckpoint,
  IoError,
  DegenerateSamplingExhausted,
  MissingPrediction,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library. `index` carries the axis/channel
// number for the per-axis variants and is -1 otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, int index = -1);

  ErrorCode code() const noexcept { return code_; }
  int index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  int index_;
};

}  // namespace axisforge
