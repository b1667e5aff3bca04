#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kkrl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad indices, mismatched lengths, unparsable text.
class StructuralError : public Error {
 public:
  using Error::Error;
};

class ParseError : public StructuralError {
 public:
  using StructuralError::StructuralError;
};

// Well-formed input that fails a checked invariant (e.g. a stored solution
// that is not the unique model of its puzzle).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  GenerationError(const std::string& what, std::size_t attempts)
      : Error(what), attempts_(attempts) {}

  std::size_t attempts() const noexcept { return attempts_; }

 private:
  std::size_t attempts_;
};

// Nonfinite values in the optimizer path.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace kkrl
