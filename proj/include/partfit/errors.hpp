#pragma once

#include <stdexcept>
#include <string>

namespace partfit {

// Error taxonomy for the whole library. Every failure path throws one of
// these; the CLI maps them onto exit codes (1 = usage/IO, 2 = numerical).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation that requires a non-empty point set received an empty one.
class EmptySetError : public Error {
 public:
  using Error::Error;
};

// Caller violated a documented precondition (dimension mismatch, bad range).
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

// A file does not conform to its documented layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Weak-perspective projection hit a nonpositive depth.
class ProjectionError : public Error {
 public:
  using Error::Error;
};

// Part-annotation transfer cannot proceed (e.g. every target part empty).
class AnnotationError : public Error {
 public:
  using Error::Error;
};

// Fit invoked with no usable signal (all targets empty and no landmarks).
class NothingToFitError : public Error {
 public:
  using Error::Error;
};

// A numerical routine produced NaN/inf and aborted.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure (missing file, unwritable directory).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace partfit
