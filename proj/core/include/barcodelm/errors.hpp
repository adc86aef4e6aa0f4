#pragma once

#include <stdexcept>
#include <string>

namespace barcodelm {

// Bad user input: unknown flags, missing columns, out-of-range parameters.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or insufficient data (files, corpora, label sets).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: shape mismatches, non-finite values, failed factorizations.
class MathError : public std::runtime_error {
 public:
  explicit MathError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace barcodelm
