#pragma once

#include <stdexcept>
#include <string>

namespace ideotrace {

/// Malformed or degenerate input data. The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values encountered during optimization. CLI exit code 3.
class DivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ideotrace
