#pragma once

#include <stdexcept>
#include <string>

namespace phc {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Precondition or parameter-range violation.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

// Malformed file content (timetag, histogram, curve or sweep files).
class FormatError : public Error {
public:
  enum class Kind {
    BadMagic,
    VersionMismatch,
    Truncated,
    Unsorted,
    OutOfRange,
    ChannelCount,
    BadHeader,
    BadRow,
    Io,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

// Run-config validation failure; the message carries the field path.
class ConfigError : public Error {
public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

// A fit could not be set up or produced unusable output.
class FitError : public Error {
public:
  using Error::Error;
};

}  // namespace phc
