#pragma once

#include <stdexcept>
#include <string>

namespace champagne {

/// Argument outside the domain of a mathematical function (poles, forbidden regions).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid or inconsistent configuration, detected before any computation starts.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A semiclassical model used outside the parameter range where it is monotone/valid.
class ModelRangeError : public std::range_error {
public:
    using std::range_error::range_error;
};

/// Violated operation precondition that is not a plain configuration problem.
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Least-squares or lattice fit that failed its residual contract.
class FitError : public std::runtime_error {
public:
    FitError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Chart transport whose integer-affine transition could not be rounded reliably.
class GluingError : public std::runtime_error {
public:
    GluingError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Monte Carlo estimate whose standard error exceeds the requested bound.
class SampleSizeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace champagne
