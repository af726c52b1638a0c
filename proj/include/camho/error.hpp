#pragma once

#include <stdexcept>
#include <string>

namespace camho {

// Error categories map onto CLI exit codes in tools/camho.cpp:
// InvalidArgument/FormatError/ConfigError/InsufficientData -> 2,
// CompatibilityError -> 3, everything else -> 1.

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ProtocolViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EndOfTrace : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CompatibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace camho
