#pragma once

#include <stdexcept>
#include <string>

namespace pvopf {

/// Base class for all recoverable errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Feeder data violates a model invariant (connectivity, impedances, bounds).
class ModelError : public Error {
public:
    using Error::Error;
};

/// Inverter, controller or scenario parameters are inconsistent.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input text. Carries the 1-based line number of the offending line.
class ParseError : public Error {
public:
    ParseError(const std::string& source, int line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    int line() const { return line_; }

private:
    int line_;
};

/// A numerical kernel failed (e.g. eigensolver non-convergence).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The voltage feasible set was found empty during a run.
class InfeasibleError : public Error {
public:
    InfeasibleError(long epoch, double residual, const std::string& what)
        : Error(what), epoch_(epoch), residual_(residual) {}

    long epoch() const { return epoch_; }
    double residual() const { return residual_; }

private:
    long epoch_;
    double residual_;
};

/// A precondition of an operation was not met by the caller.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace pvopf
