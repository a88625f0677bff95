#ifndef PSPIN_ERRORS_HPP
#define PSPIN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pspin {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class InvalidWitness : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Raised when an allocation would exceed a configured memory cap.
class MemoryBudget : public Error {
 public:
  using Error::Error;
};

// Raised when every available strategy for a computation exceeds its cap.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class InsufficientReplicas : public Error {
 public:
  using Error::Error;
};

}  // namespace pspin

#endif  // PSPIN_ERRORS_HPP
