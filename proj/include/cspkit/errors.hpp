#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cspkit {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// exit codes (config errors -> 2, solver failures -> 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition or shape mismatch at an API boundary.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Model parameters outside their admissible range (e.g. kappa <= lambda).
class ParameterError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Base for numerical failures of solvers and decompositions.
class SolverError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public SolverError {
 public:
  NonFiniteError(const std::string& what, int coordinate)
      : SolverError(what), coordinate_(coordinate) {}
  /// Index of the perturbed coordinate that produced the non-finite value,
  /// or -1 when the base point itself is non-finite.
  int coordinate() const noexcept { return coordinate_; }

 private:
  int coordinate_;
};

class SingularityError : public SolverError {
 public:
  using SolverError::SolverError;
};

class NonConvergenceError : public SolverError {
 public:
  NonConvergenceError(const std::string& what, double final_residual,
                      std::vector<double> trace)
      : SolverError(what), final_residual_(final_residual), trace_(std::move(trace)) {}
  double final_residual() const noexcept { return final_residual_; }
  /// Residual norm after every Newton iteration.
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  double final_residual_;
  std::vector<double> trace_;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class NoSpectralGapError : public SolverError {
 public:
  using SolverError::SolverError;
};

class StiffnessError : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace cspkit
