#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cmag {

enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  DanglingEndpoint,
  TypeMismatch,
  RelationCollision,
  UnknownRelation,
  TooFewEdges,
  Saturation,
  OutOfRange,
  Truncated,
  ChecksumMismatch,
  BadFormat,
  EmptyInput,
  NonFinite,
  Io,
  DegenerateSplit,
  MissingModality,
  UnknownCategory,
  ValidationFailed,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

// Warnings go to stderr unless silenced; the counter lets tests observe them.
void warn(std::string_view message);
std::size_t warning_count();
void set_warnings_quiet(bool quiet);

}  // namespace cmag
