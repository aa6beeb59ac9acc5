#pragma once
#include <stdexcept>
#include <string>

namespace jrrs {

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed data: non-finite entries, mismatched dimensions, empty index sets.
class InvalidInput : public Error
{
public:
    using Error::Error;
};

/// Hyperparameters outside their admissible range (k, K, folds, ...).
class InvalidConfig : public Error
{
public:
    using Error::Error;
};

/// The solver produced a non-finite objective or decomposition.
class NumericalFailure : public Error
{
public:
    using Error::Error;
};

/// The noise level cannot be estimated from the residuals (m <= q, or zero residual).
class SigmaNotEstimable : public Error
{
public:
    using Error::Error;
};

/// Exhaustive search refused because the predictor count exceeds the cap.
class RefusedTooLarge : public Error
{
public:
    using Error::Error;
};

} // namespace jrrs
