#pragma once

#include <stdexcept>
#include <string>

namespace subgrid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A time or index outside the domain of the object being evaluated.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Invalid arguments: mismatched dimensions, non-positive sizes and the like.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A NaN/Inf produced during evaluation.
class NonFiniteError : public Error {
public:
  using Error::Error;
};

/// The cG(1) fixed-point iteration failed to converge on some interval.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, std::size_t interval, double residual)
      : Error(what), interval_(interval), residual_(residual) {}

  std::size_t interval() const noexcept { return interval_; }
  double residual() const noexcept { return residual_; }

private:
  std::size_t interval_;
  double residual_;
};

/// An averaging window that does not fit the trajectory, or too few nodes in it.
class WindowError : public Error {
public:
  using Error::Error;
};

} // namespace subgrid
