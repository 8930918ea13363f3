#pragma once

#include <stdexcept>
#include <string>

namespace ams {

// Base for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad argument values or mismatched shapes.
struct ValidationError : Error {
  using Error::Error;
};

// Malformed input files.
struct DataError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

// API misuse, e.g. a backward call that does not match its forward pass.
struct ContractError : Error {
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace ams
