#pragma once

#include <stdexcept>
#include <string>

namespace tnq {

// Base class for all library errors. Subclasses exist so callers (and the
// CLI exit-code mapping) can distinguish usage, I/O and numerical failures.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad arguments or malformed configuration supplied by the caller.
class InvalidArgument : public Error {
  public:
    using Error::Error;
};

// Unreadable, truncated or wrongly formatted files and byte streams.
class FormatError : public Error {
  public:
    using Error::Error;
};

// Quadrature/root-solver non-convergence, degenerate models, divergence.
class NumericalError : public Error {
  public:
    using Error::Error;
};

// Cross-client protocol violations in the simulator (shape mismatches etc.).
class ProtocolError : public Error {
  public:
    using Error::Error;
};

}  // namespace tnq
