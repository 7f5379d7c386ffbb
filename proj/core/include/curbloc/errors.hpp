#pragma once

#include <stdexcept>
#include <string>

namespace curbloc {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

// Operation received values expressed in incompatible coordinate frames.
class FrameMismatchError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// No NDT cell of the reference cloud holds enough points.
class DegenerateReferenceError : public Error {
 public:
  using Error::Error;
};

// Observation could not be anchored to a base-map vertex in time.
class TemporalAssociationError : public Error {
 public:
  using Error::Error;
};

class EmptyMapError : public Error {
 public:
  using Error::Error;
};

class SessionCollisionError : public Error {
 public:
  using Error::Error;
};

// Malformed or unsupported file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace curbloc
