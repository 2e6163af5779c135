#pragma once

#include <stdexcept>
#include <string>

namespace hardylab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid descriptor, option, or scenario content.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input lies outside the domain of the mathematical operation
/// (non-positive u, unreachable constraint, set touching the boundary, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. fields defined on different geometries.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// The grid is too coarse for the requested subdomain.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// An analytic hypothesis required by the computation is violated.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

}  // namespace hardylab
