#pragma once

#include <stdexcept>
#include <string>

namespace ratebv
{

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments: dimension mismatches, malformed load paths, bad sample counts.
class ArgumentError : public Error
{
public:
    using Error::Error;
};

/// Non-finite input or energy.
class DomainError : public Error
{
public:
    using Error::Error;
};

/// An iterative solver hit its iteration cap.
class NumericalError : public Error
{
public:
    NumericalError(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual)
    {
    }

    [[nodiscard]] double residual() const { return residual_; }

private:
    double residual_;
};

/// Inner solve of one implicit time step failed.
class StepFailure : public NumericalError
{
public:
    StepFailure(std::size_t step, double residual)
        : NumericalError("incremental step " + std::to_string(step) + " did not converge", residual),
          step_(step)
    {
    }

    [[nodiscard]] std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

/// A member of an epsilon sweep failed; carries the offending epsilon.
class SweepFailure : public NumericalError
{
public:
    SweepFailure(double epsilon, const std::string& cause, double residual)
        : NumericalError("epsilon = " + std::to_string(epsilon) + ": " + cause, residual), epsilon_(epsilon)
    {
    }

    [[nodiscard]] double epsilon() const { return epsilon_; }

private:
    double epsilon_;
};

/// Trajectory and load (or trajectory and problem) do not belong together.
class ConsistencyError : public Error
{
public:
    using Error::Error;
};

/// A property that holds mathematically was observed violated.
class InvariantViolation : public Error
{
public:
    using Error::Error;
};

}  // namespace ratebv
