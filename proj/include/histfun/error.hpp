#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace histfun {

/// Base class for every error raised by the library. `kind()` is a short
/// machine-readable tag used by the CLI's error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InvalidConfig : public Error {
 public:
  explicit InvalidConfig(const std::string& what) : Error("invalid_config", what) {}
};

/// A point or time outside the triangular domain 0 <= s <= t <= T.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain", what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error("data", what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error("numerical", what) {}
};

/// Raised when an iterative solver hits its iteration cap. Carries the last
/// KKT residual (inner solver) or the objective trace (outer loop).
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, std::vector<double> trace = {})
      : Error("convergence", what), residual_(residual), trace_(std::move(trace)) {}
  double residual() const noexcept { return residual_; }
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  double residual_;
  std::vector<double> trace_;
};

}  // namespace histfun
