#pragma once

#include <stdexcept>
#include <string>

namespace jvcqma {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidBandwidth : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class ShapeError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class EmptyCandidateSet : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Fewer positively weighted observations than free coefficients.
class UnderdeterminedLocalFit : public Error {
 public:
  using Error::Error;
};

/// Too many failed fits in a LOO column, replication set or bootstrap run.
class FailureBudgetExceeded : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// Model file refers to training data whose content hash no longer matches.
class StaleModel : public Error {
 public:
  using Error::Error;
};

class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace jvcqma
