#pragma once

#include <stdexcept>
#include <string>

namespace loopcft {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a function (as opposed to a pole).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Evaluation hit a genuine pole of a meromorphic function.
class PoleError : public Error {
public:
    using Error::Error;
};

/// A series or iteration failed its convergence test.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Limit extrapolation at a degenerate point was unstable.
class RegularizationError : public Error {
public:
    using Error::Error;
};

/// Two pole positions of the block recursion coincide at this coupling.
class ResonanceError : public Error {
public:
    using Error::Error;
};

/// Gram matrix of a Verma module is numerically singular.
class SingularGramError : public Error {
public:
    using Error::Error;
};

/// Two estimates of the same limit disagree.
class InconsistentLimitError : public Error {
public:
    using Error::Error;
};

/// Least-squares system too ill-conditioned to trust.
class ConditioningError : public Error {
public:
    using Error::Error;
};

/// Problem size exceeds a configured guard.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Fit with repeated abscissae or too few points.
class DegenerateFitError : public Error {
public:
    using Error::Error;
};

}  // namespace loopcft
