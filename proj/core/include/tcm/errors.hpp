#pragma once

#include <stdexcept>
#include <string>

namespace tcm {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user input: malformed config, unknown task id, missing seed.
struct ConfigError : Error {
  using Error::Error;
};

// Missing stage prerequisite on disk (maps to CLI exit code 2).
struct DependencyError : ConfigError {
  using ConfigError::ConfigError;
};

// Malformed data file (graph JSON, edge list, CSV).
struct ParseError : Error {
  using Error::Error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct ParamError : Error {
  using Error::Error;
};

// Non-finite or exploding loss during an optimization loop.
struct DivergenceError : Error {
  using Error::Error;
};

struct SingularityError : Error {
  using Error::Error;
};

// Statistic undefined for the given matrix size (e.g. ATD with k = 1).
struct StatError : Error {
  using Error::Error;
};

}  // namespace tcm
