#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rqews {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments, configuration values or violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failure while reading a run, feature, label or model file.
class LoadError : public Error {
 public:
  enum class Kind { io, empty, malformed_header, non_finite, truncated, bad_magic, schema };

  LoadError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Zero-variance or otherwise unusable signal window.
class DegenerateSignal : public Error {
 public:
  DegenerateSignal() : Error("degenerate signal") {}
  explicit DegenerateSignal(const std::string& detail) : Error("degenerate signal: " + detail) {}
};

/// SMO hit its iteration cap before the KKT gap fell below tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(double violation, std::size_t iterations)
      : Error("SVM training did not converge after " + std::to_string(iterations) +
              " updates (KKT violation " + std::to_string(violation) + ")"),
        violation_(violation),
        iterations_(iterations) {}

  double violation() const noexcept { return violation_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double violation_;
  std::size_t iterations_;
};

/// Numerical integration of the surrogate model blew up.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace rqews
