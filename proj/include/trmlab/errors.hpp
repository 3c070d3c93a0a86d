#pragma once

#include <stdexcept>

namespace trmlab {

// Precondition or invariant broken by the caller: bad dimensions, invalid
// configs, out-of-range arguments.
struct ContractViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// More mutually orthogonal directions requested than the space admits.
struct InsufficientDimension : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// The trajectory difference vanished; no orthogonal slack direction exists.
struct DegenerateDirection : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A gradient vanished where an angle between gradients was requested.
struct UndefinedAngle : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN or Inf surfaced in an objective or update.
struct NumericFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace trmlab
