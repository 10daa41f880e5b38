#pragma once

#include <stdexcept>
#include <string>

namespace aerogs {

// Base of every error raised by the library. The CLI maps subclasses onto
// process exit codes (config 2, solver 3, I/O 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical precondition violated: non-positive determinant, singular
// matrix, unsorted scalings, parameter outside its physical range.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A particle's kernel stencil leaves the background grid.
class OutOfDomainError : public DomainError {
 public:
  using DomainError::DomainError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Velocity ceiling exceeded or non-finite state; usually a CFL violation.
class SolverBlowUp : public Error {
 public:
  explicit SolverBlowUp(const std::string& what, long frame = -1)
      : Error(what), frame_(frame) {}
  long frame() const noexcept { return frame_; }

 private:
  long frame_;
};

}  // namespace aerogs
