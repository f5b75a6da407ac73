#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace ngflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or layer counts that disagree with a ModelSpec or dataset.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument values (negative scales, out-of-range depths, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Non-finite inputs or outputs.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Evaluation outside the mathematical domain of a closed form.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A reference solver was asked for a regime it does not cover.
class UnsupportedRegime : public Error {
 public:
  using Error::Error;
};

/// The max-margin problem has no feasible point (data not separable).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A linear solve whose relative residual exceeds tolerance.
///
/// When raised from inside a training run the step index is attached.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual,
              std::optional<std::int64_t> step = std::nullopt)
      : Error(step ? what + " (step " + std::to_string(*step) + ")" : what),
        residual_(residual),
        step_(step) {}

  double residual() const noexcept { return residual_; }
  std::optional<std::int64_t> step() const noexcept { return step_; }

 private:
  double residual_;
  std::optional<std::int64_t> step_;
};

/// Malformed experiment configuration (unknown keys, bad values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ngflow
