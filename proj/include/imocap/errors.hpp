#pragma once

#include <stdexcept>
#include <string>

namespace imocap {

// Base class for everything thrown by this library, so callers can
// distinguish our failures from std:: ones with a single catch.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerically unusable input (near-zero or near-parallel 6D columns,
// singular rotation mean, ...).
struct DegenerateInput : Error {
  using Error::Error;
};

// Vector/matrix sizes disagree with what the callee was configured for.
struct DimensionMismatch : Error {
  using Error::Error;
};

// An operation that needs at least one element got none.
struct EmptyInput : Error {
  using Error::Error;
};

// Sequence shorter than the operation's minimum length.
struct SequenceTooShort : Error {
  using Error::Error;
};

// Two sequences that must be the same length are not.
struct LengthMismatch : Error {
  using Error::Error;
};

// Stored or requested network layout disagrees with the expected spec
// (e.g. streaming a bidirectional net, loading mismatched weights).
struct SpecMismatch : Error {
  using Error::Error;
};

// Fusion thresholds out of order or out of range.
struct BadThresholds : Error {
  using Error::Error;
};

// Training loss became NaN/inf; carries the epoch/batch in the message.
struct NonFiniteLoss : Error {
  using Error::Error;
};

// Pipeline invoked with default-constructed (never trained/loaded) params.
struct UntrainedNetwork : Error {
  using Error::Error;
};

// File could not be opened/read/written.
struct IoError : Error {
  using Error::Error;
};

// File opened fine but its contents do not parse as the expected format.
struct ParseError : Error {
  using Error::Error;
};

}  // namespace imocap
