#pragma once

#include <stdexcept>
#include <string>

namespace tucker_hurdle {

/// Tensor or matrix dimensions that do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition was violated by the caller.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input data (files, ids, categories).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run or simulation configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unrecoverable sampler failure (e.g. no finite starting point).
class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A design matrix without full column rank.
class RankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tucker_hurdle
