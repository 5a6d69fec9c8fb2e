#pragma once

#include <stdexcept>
#include <string>

namespace msf {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A thermodynamic input left the admissible set (nonpositive density or temperature).
class DomainError : public Error {
public:
    DomainError(const std::string& what, int component)
        : Error(what), component_(component) {}

    /// Index of the offending component, -1 for the temperature.
    int component() const noexcept { return component_; }

private:
    int component_;
};

/// Invalid configuration; `key()` names the offending key path.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class SingularityError : public Error {
public:
    using Error::Error;
};

/// Non-finite value encountered while assembling the discrete system.
class SolverError : public Error {
public:
    SolverError(const std::string& what, int node) : Error(what), node_(node) {}
    int node() const noexcept { return node_; }

private:
    int node_;
};

class NonConvergence : public Error {
public:
    NonConvergence(int iterations, double last_residual)
        : Error("nonlinear solver did not converge after " + std::to_string(iterations) +
                " iterations (residual " + std::to_string(last_residual) + ")"),
          iterations_(iterations),
          last_residual_(last_residual) {}

    int iterations() const noexcept { return iterations_; }
    double last_residual() const noexcept { return last_residual_; }

private:
    int iterations_;
    double last_residual_;
};

/// A run gave up: time-step halving was exhausted.
class Abort : public Error {
public:
    Abort(double t, const std::string& reason)
        : Error("run aborted at t=" + std::to_string(t) + ": " + reason), t_(t), reason_(reason) {}

    double time() const noexcept { return t_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    double t_;
    std::string reason_;
};

}  // namespace msf
