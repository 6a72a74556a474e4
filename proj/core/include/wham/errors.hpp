#pragma once

#include <stdexcept>
#include <string>

namespace wham {

// Base class for all errors raised by the library. The CLI maps these to
// exit code 1 (input/validation) or 2 (infeasibility) depending on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Graph ingest and validation.
class ParseError : public Error {
 public:
  using Error::Error;
};
class UnknownNodeError : public Error {
 public:
  using Error::Error;
};
class CycleError : public Error {
 public:
  using Error::Error;
};
class AffinityError : public Error {
 public:
  using Error::Error;
};
class NonForwardInputError : public Error {
 public:
  using Error::Error;
};

// Architecture model.
class InvalidDesignError : public Error {
 public:
  using Error::Error;
};

// Scheduling and search.
class NoCoreForAffinityError : public Error {
 public:
  using Error::Error;
};
class InfeasibleBudgetError : public Error {
 public:
  using Error::Error;
};
class HorizonTooSmallError : public Error {
 public:
  using Error::Error;
};

// Partitioning and tensor-model splits.
class UnpartitionableModelError : public Error {
 public:
  using Error::Error;
};
class IndivisibleShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace wham
