#pragma once

#include <stdexcept>
#include <string>

namespace qpinn {

/// A computation produced NaN/Inf or could not make progress.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An experiment configuration failed validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qpinn
