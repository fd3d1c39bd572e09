#pragma once

#include <stdexcept>
#include <string>

namespace streetrisk {

// Bad or missing input data. The CLI maps this to exit code 1.
class input_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure could not produce a valid result (exit code 2).
class computation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace streetrisk
