#pragma once

#include <stdexcept>
#include <string>

namespace repshift {

// Base of every error the library raises; callers that only care about
// "something in the pipeline failed" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class StoreError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Power iteration failed to meet its tolerance. Carries the last estimate so
// callers can decide whether it is good enough.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double last_estimate, double residual)
        : NumericalError(what), last_estimate_(last_estimate), residual_(residual) {}

    double last_estimate() const { return last_estimate_; }
    double residual() const { return residual_; }

private:
    double last_estimate_;
    double residual_;
};

}  // namespace repshift
