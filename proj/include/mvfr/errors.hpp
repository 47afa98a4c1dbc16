#pragma once
#include <stdexcept>

namespace mvfr {

// Error taxonomy mirrors the CLI exit-code contract:
//   ConfigError -> 2 (bad arguments / bad config, includes bad distribution arguments)
//   DataError   -> 3 (malformed or inconsistent input data)
//   NumericalError -> 4 (factorization failures, degenerate weights, ...)
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mvfr
