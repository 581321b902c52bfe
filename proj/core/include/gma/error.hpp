#pragma once

#include <stdexcept>
#include <string>

namespace gma {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV, JSON, checkpoint header).
class ParseError : public Error {
public:
  using Error::Error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// A caller broke an operation's precondition.
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
  using Error::Error;
};

}  // namespace gma
