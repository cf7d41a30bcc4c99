#pragma once

#include <stdexcept>
#include <string>

namespace hdrv {

// Error categories map onto CLI exit codes: usage/config -> 1, data -> 2,
// numerical -> 3. InvalidArgument is the generic precondition failure.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hdrv
