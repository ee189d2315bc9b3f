#pragma once

#include <stdexcept>
#include <string>

namespace variscan {

// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Sampler or summary state violates a structural invariant.
class InvalidStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Input data failed validation (CLI exit code 2).
class DataValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Linear algebra or sampler breakdown (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Artifacts or checkpoints produced under a different configuration (CLI exit code 4).
class ArtifactMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace variscan
