#pragma once

#include <stdexcept>
#include <string>

namespace pfedpm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/size mismatch between tensor operands.
struct DimensionError : Error {
  using Error::Error;
};

// NaN/Inf produced by a numeric operation.
struct NumericError : Error {
  using Error::Error;
};

// Precondition violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

// Malformed input file (IDX, config payloads).
struct FormatError : Error {
  using Error::Error;
};

// Invalid experiment configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Inconsistent protocol state (missing prototypes, mismatched uploads).
struct ProtocolError : Error {
  using Error::Error;
};

}  // namespace pfedpm
