#pragma once

#include <stdexcept>
#include <string>

namespace wt5 {

// Bad input data: malformed files, invariant violations, unresolvable ids.
// The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace wt5
