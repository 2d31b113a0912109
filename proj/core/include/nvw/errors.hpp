#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nvw {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Field requested on (or within the guard distance of) a wire centerline.
class SingularityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The ODMR scan carries no usable slope (dark stacks, scan off resonance).
class CalibrationFailed : public Error {
 public:
  using Error::Error;
};

/// Inputs that must agree (stack vs config, stack vs stack) do not.
class MismatchError : public Error {
 public:
  using Error::Error;
};

/// Malformed file. `offset()` is the byte offset where parsing stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace nvw
