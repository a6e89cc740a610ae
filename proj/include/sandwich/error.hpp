#ifndef SANDWICH_ERROR_HPP
#define SANDWICH_ERROR_HPP

#include <stdexcept>
#include <string>

namespace sandwich {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: inconsistent sizes, bad partitions, missing pairs.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class InvalidLevelError : public Error {
 public:
  using Error::Error;
};

/// An operator was applied outside of its domain subspace.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An empty feasible set (density polytope, LP) where one was required.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace sandwich

#endif  // SANDWICH_ERROR_HPP
