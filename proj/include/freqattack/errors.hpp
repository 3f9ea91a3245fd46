#pragma once

#include <stdexcept>
#include <string>

namespace freqattack {

// Base of every error raised by the toolkit. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user configuration, invalid arguments or violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing files, unreadable or malformed file contents.
class IoError : public Error {
 public:
  using Error::Error;
};

class OracleError : public Error {
 public:
  enum class Kind { kTransport, kTimeout, kMalformedResponse, kWrongClassCount, kRemote };

  OracleError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(OracleError::Kind kind);

}  // namespace freqattack
