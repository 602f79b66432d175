#pragma once

#include <stdexcept>
#include <string>

namespace schedforge {

// Base for every domain error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- workload ----
class ParseError : public Error {
 public:
  using Error::Error;
};
class MissingFieldsError : public ParseError {
 public:
  using ParseError::ParseError;
};
class NonNumericFieldError : public ParseError {
 public:
  using ParseError::ParseError;
};
class EmptyTraceError : public Error {
 public:
  using Error::Error;
};
class OutOfRangeError : public Error {
 public:
  using Error::Error;
};
class InvalidParamsError : public Error {
 public:
  using Error::Error;
};

// ---- simulator ----
class JobTooLargeError : public Error {
 public:
  using Error::Error;
};
class EmptySequenceError : public Error {
 public:
  using Error::Error;
};
class BadIndexError : public Error {
 public:
  using Error::Error;
};
class ZeroHorizonError : public Error {
 public:
  using Error::Error;
};
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

// ---- baselines ----
class NonPositiveRuntimeError : public Error {
 public:
  using Error::Error;
};
class EmptyWindowError : public Error {
 public:
  using Error::Error;
};

// ---- neural ----
class NoValidJobsError : public Error {
 public:
  using Error::Error;
};
class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

// ---- rl ----
class LengthMismatchError : public Error {
 public:
  using Error::Error;
};
class EmptyBatchError : public Error {
 public:
  using Error::Error;
};
class NonFiniteLossError : public Error {
 public:
  using Error::Error;
};

// ---- ddppo ----
class NoGradientsError : public Error {
 public:
  using Error::Error;
};
class UnscoredMemberError : public Error {
 public:
  using Error::Error;
};
class AllTrialsFailedError : public Error {
 public:
  using Error::Error;
};

// ---- metrics ----
class NegativeInputError : public Error {
 public:
  using Error::Error;
};
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

// ---- cli ----
class ProtocolMismatchError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace schedforge
