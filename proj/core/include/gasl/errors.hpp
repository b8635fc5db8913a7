#pragma once

#include <stdexcept>
#include <string>

namespace gasl {

// Exit-code mapping used by the CLI: ConfigError -> 2, ProtocolViolation -> 3,
// IngestError -> 4, anything else -> 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};
struct ProtocolViolation : Error {
  using Error::Error;
};
struct IngestError : Error {
  using Error::Error;
};

struct InvalidTask : ConfigError {
  using ConfigError::ConfigError;
};
struct ShotOverflow : Error {
  using Error::Error;
};
struct DegenerateInput : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct ClusterError : Error {
  using Error::Error;
};
struct MissingDescription : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct EvalError : Error {
  using Error::Error;
};
struct Unsupported : Error {
  using Error::Error;
};
struct EmptyReport : Error {
  using Error::Error;
};

}  // namespace gasl
