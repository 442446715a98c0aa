#pragma once

#include <stdexcept>
#include <string>

namespace gridfreq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed model, scenario or distribution input.
class ModelError : public Error {
public:
    using Error::Error;
};

class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, double time = -1.0)
        : Error(what), time_(time) {}
    /// Simulation time of the failure, or -1 for static solves.
    double time() const noexcept { return time_; }

private:
    double time_;
};

class SingularJacobian : public Error {
public:
    using Error::Error;
};

class InfeasibleOperatingPoint : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class UnstableClosedLoop : public Error {
public:
    using Error::Error;
};

class UnstableSimulation : public Error {
public:
    UnstableSimulation(const std::string& what, double time)
        : Error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

class GridMismatch : public Error {
public:
    using Error::Error;
};

class EmptyWindow : public Error {
public:
    using Error::Error;
};

class TargetUnreachable : public Error {
public:
    using Error::Error;
};

}  // namespace gridfreq
