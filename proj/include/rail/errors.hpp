#pragma once

#include <stdexcept>
#include <string>

namespace rail {

// Exit-code contract shared by every CLI subcommand.
enum class ExitCode : int {
  kOk = 0,
  kVerifyFailed = 1,
  kUsage = 2,
  kNumericAbort = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Raised by the binary loaders. `kind` distinguishes the failure class so
// callers (and tests) can tell a truncated file from a malformed header.
class LoadError : public Error {
 public:
  enum class Kind { kMalformedHeader, kDimension, kTruncated, kIo };

  LoadError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace rail
