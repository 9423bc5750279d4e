#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace qhdlab {

/// Rejected input: bad grid parameters, config values, hypotheses.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A solver produced NaN/Inf. Carries the simulation time of the failing step.
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(const std::string& what, double time)
        : std::runtime_error(what + " (t=" + std::to_string(time) + ")"), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Density fell below the floor an extended (z = v + i w) solver can handle.
class VacuumError : public std::runtime_error {
public:
    VacuumError(const std::string& what, double min_density, double time)
        : std::runtime_error(what + " (min density " + std::to_string(min_density) + ", t=" +
                             std::to_string(time) + ")"),
          min_density_(min_density), time_(time) {}
    double min_density() const noexcept { return min_density_; }
    double time() const noexcept { return time_; }

private:
    double min_density_;
    double time_;
};

/// A monitored run crossed a breakdown threshold before its final time.
class BreakdownError : public std::runtime_error {
public:
    BreakdownError(const std::string& what, std::string cause, double time)
        : std::runtime_error(what + " (" + cause + " at t=" + std::to_string(time) + ")"),
          cause_(std::move(cause)), time_(time) {}
    const std::string& cause() const noexcept { return cause_; }
    double time() const noexcept { return time_; }

private:
    std::string cause_;
    double time_;
};

}  // namespace qhdlab
