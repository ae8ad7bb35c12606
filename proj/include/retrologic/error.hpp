#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace retrologic {

/// Malformed line notation. `offset` is the 0-based byte position of the
/// offending character in the parsed string.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Well-formed notation using a construct this dialect does not model
/// (stereo bonds, chirality, isotopes).
class UnsupportedFeature : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Inconsistent or unusable input data: broken atom maps, empty reaction
/// centers, supports that do not contain their own ground truth.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A distribution was requested over an empty support.
class EmptySupportError : public DataError {
 public:
  using DataError::DataError;
};

/// A support exceeded the configured entry cap.
class SupportCapError : public DataError {
 public:
  using DataError::DataError;
};

/// Input exceeds a hard size bound of an exhaustive routine.
class SizeLimitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mismatched tensor or graph shapes between a forward and backward pass.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Training produced a non-finite value.
class NumericAbort : public std::runtime_error {
 public:
  NumericAbort(const std::string& what, long long update)
      : std::runtime_error(what + " at update " + std::to_string(update)),
        update_(update) {}

  long long update() const noexcept { return update_; }

 private:
  long long update_;
};

}  // namespace retrologic
