#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace satsplit {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SATSPLIT_DEFINE_ERROR(Name)        \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

// sim / topology
SATSPLIT_DEFINE_ERROR(SchedulingInPast);
SATSPLIT_DEFINE_ERROR(NoRoute);
SATSPLIT_DEFINE_ERROR(InvalidParameter);

// handshakes
SATSPLIT_DEFINE_ERROR(MalformedSni);
SATSPLIT_DEFINE_ERROR(ProtocolError);
SATSPLIT_DEFINE_ERROR(SessionExpired);

// keyless
SATSPLIT_DEFINE_ERROR(Unauthorized);
SATSPLIT_DEFINE_ERROR(ChannelRevoked);

// dane
SATSPLIT_DEFINE_ERROR(NxDomain);
SATSPLIT_DEFINE_ERROR(Bogus);

// ece
SATSPLIT_DEFINE_ERROR(InvalidRecordSize);
SATSPLIT_DEFINE_ERROR(UnknownKeyId);
SATSPLIT_DEFINE_ERROR(AuthenticationFailure);
SATSPLIT_DEFINE_ERROR(FramingError);

// cachecast
SATSPLIT_DEFINE_ERROR(KeyEpochMismatch);

// scenarios
SATSPLIT_DEFINE_ERROR(UnknownKnob);
SATSPLIT_DEFINE_ERROR(InvariantViolation);

#undef SATSPLIT_DEFINE_ERROR

/// Configuration problem, optionally pinned to a line of the input file.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::size_t line = 0, std::string field = {})
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

}  // namespace satsplit
