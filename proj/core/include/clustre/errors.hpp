#pragma once

#include <stdexcept>
#include <string>

namespace clustre {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A constructor or operation received arguments that violate its invariants.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// An H-integral does not converge (integrand grows faster than z^2).
class IntegrabilityError : public Error {
public:
    using Error::Error;
};

/// The simulated event count exceeded the configured cap.
class ClusterExplosion : public Error {
public:
    using Error::Error;
};

/// A precondition of the optimal-contract characterisation does not hold.
class HypothesisViolation : public Error {
public:
    using Error::Error;
};

/// A root-finder could not find a sign change in its search region.
class NoBracket : public Error {
public:
    using Error::Error;
};

/// An iterative method or quadrature did not reach its tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

} // namespace clustre
