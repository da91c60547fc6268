#pragma once

#include <stdexcept>
#include <string>

namespace drl {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model data violates an invariant (stochasticity, ranges, dimensions).
class ModelError : public Error {
public:
    using Error::Error;
};

/// A numeric routine could not reach the requested accuracy.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Argmax sets did not settle across the discount sweep.
class BlackwellUnstable : public Error {
public:
    using Error::Error;
};

} // namespace drl
