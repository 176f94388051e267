#pragma once

#include <stdexcept>
#include <string>

namespace cbfpc {

// Bad problem wiring: dimension mismatches, invalid parameters, malformed
// config files. Always a caller bug or bad input, never a numerical event.
class ConfigurationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Barrier evaluated at a point with some F_i >= 0. The log-barrier and its
// derivatives are undefined there.
class InfeasibleEvaluation : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A drift/prediction quantity was requested but the needed Jacobian or
// signal derivative is not wired. Callers may fall back to a
// finite-difference estimate.
class PredictionUnavailable : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Phase-I search certified that no strictly feasible point exists (or the
// best achievable margin is below the requested one).
class InfeasibleProblem : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Problem size exceeds a hard cap of an exhaustive algorithm.
class CapacityExceeded : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A matrix that must be invertible for the current operation is singular or
// numerically indistinguishable from singular.
class SingularGeometry : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Backtracking exhausted its budget without producing a strictly feasible
// iterate. The pre-step state is left untouched.
class StepFailed : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// The carried iterate is already infeasible at the new plant state, before
// any update was attempted.
class InvalidState : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Non-finite values appeared in the state or iterate.
class NumericalDivergence : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Stable name for event logs.
inline std::string error_kind(const std::runtime_error& e) {
  if (dynamic_cast<const ConfigurationError*>(&e)) return "ConfigurationError";
  if (dynamic_cast<const InfeasibleEvaluation*>(&e)) return "InfeasibleEvaluation";
  if (dynamic_cast<const PredictionUnavailable*>(&e)) return "PredictionUnavailable";
  if (dynamic_cast<const InfeasibleProblem*>(&e)) return "InfeasibleProblem";
  if (dynamic_cast<const CapacityExceeded*>(&e)) return "CapacityExceeded";
  if (dynamic_cast<const SingularGeometry*>(&e)) return "SingularGeometry";
  if (dynamic_cast<const StepFailed*>(&e)) return "StepFailed";
  if (dynamic_cast<const InvalidState*>(&e)) return "InvalidState";
  if (dynamic_cast<const NumericalDivergence*>(&e)) return "NumericalDivergence";
  return "RuntimeError";
}

} // namespace cbfpc
