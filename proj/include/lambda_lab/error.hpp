#pragma once

#include <stdexcept>
#include <string>

namespace lambda_lab {

/// Malformed input: bad grid, non-positive metric, unknown norm kind, violated
/// operation precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration or usage problem surfaced by the CLI (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NumericalFailure {
  non_convergence,
  gap_collapse,
  near_spectrum,
  positivity_loss,
  divergence,
};

/// A computation that was well posed but failed numerically (exit code 1).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(NumericalFailure kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  NumericalFailure kind() const noexcept { return kind_; }

 private:
  NumericalFailure kind_;
};

}  // namespace lambda_lab
