#pragma once

#include <stdexcept>
#include <string>

namespace noiselab {

// Error taxonomy maps onto the CLI exit codes (see tools/main.cpp):
//   ConfigError -> 2, NumericError -> 3, SelectionError -> 4, IngestError -> 5.
// Anything else is a generic failure (exit 1).

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad keys, invalid parameter values, shape mismatches.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite values, training divergence.
class NumericError : public Error {
public:
    using Error::Error;
};

// No snapshot satisfies the requested accuracy window.
class SelectionError : public Error {
public:
    using Error::Error;
};

// Malformed or truncated input files.
class IngestError : public Error {
public:
    using Error::Error;
};

// Statistics undefined for the given data (e.g. empty true classes).
class StatsError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Unwritable output paths and similar filesystem failures.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace noiselab
