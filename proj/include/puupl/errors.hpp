#pragma once

#include <stdexcept>
#include <string>

namespace puupl {

// Invalid configuration or precondition on user-supplied parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. The message carries the byte offset when known.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. backward() without a cached forward pass.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Parameter snapshot does not match the model it is restored into.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or parameters during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace puupl
