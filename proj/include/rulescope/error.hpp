#pragma once

#include <stdexcept>
#include <string>

namespace rulescope {

enum class ErrorKind {
  kInvalidArgument,
  kNotFound,
  kParse,
  kIo,
  kTraining,
  kConflict,
};

/// Domain error carried through the library. The HTTP layer maps kind to a
/// status code and the CLI maps any Error to exit code 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* error_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kParse: return "parse_error";
    case ErrorKind::kIo: return "io_error";
    case ErrorKind::kTraining: return "training_failed";
    case ErrorKind::kConflict: return "conflict";
  }
  return "error";
}

}  // namespace rulescope
