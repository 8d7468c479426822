#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cqa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input document. `path` is a JSON pointer into the offending document.
class InputError : public Error {
 public:
  InputError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// A function was evaluated outside its domain (e.g. sqrt(v) at v <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

// The point handed to an analysis that requires feasibility is not feasible.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class PowerFlowError : public Error {
 public:
  PowerFlowError(const std::string& what, std::vector<double> trace)
      : Error(what), trace_(std::move(trace)) {}
  // Infinity-norm mismatch before each Newton step, plus the final one.
  const std::vector<double>& trace() const noexcept { return trace_; }
  double final_mismatch() const noexcept { return trace_.empty() ? 0.0 : trace_.back(); }

 private:
  std::vector<double> trace_;
};

class NonConvergenceError : public PowerFlowError {
 public:
  using PowerFlowError::PowerFlowError;
};

// The reduced Newton matrix is numerically singular: the iterate sits at (or
// near) a fold of the power-flow manifold.
class SingularJacobianError : public PowerFlowError {
 public:
  using PowerFlowError::PowerFlowError;
};

}  // namespace cqa
