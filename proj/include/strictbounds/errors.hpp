#pragma once

#include <stdexcept>
#include <string>

namespace strictbounds {

/// Operand sizes disagree (K vs x, h vs p, y vs m, ...).
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// A solver hit its iteration cap or produced a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Not enough Monte Carlo draws for the requested statistic.
class SampleTooSmallError : public std::invalid_argument {
 public:
  explicit SampleTooSmallError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed user input (model files, observations, rule files).
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace strictbounds
