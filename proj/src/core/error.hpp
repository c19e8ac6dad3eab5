#pragma once

#include <stdexcept>
#include <string>

namespace semgen {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo,
  kFormat,
  kShape,
  kNumeric,
  kMismatch,
  kInternal,
};

// Base exception of the core library. The C API maps `code()` onto its
// status enumeration.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error(ErrorCode::kInvalidArgument, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCode::kIo, w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorCode::kFormat, w) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorCode::kShape, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorCode::kNumeric, w) {}
};
struct MismatchError : Error {
  explicit MismatchError(const std::string& w) : Error(ErrorCode::kMismatch, w) {}
};

}  // namespace semgen
