#pragma once

#include <stdexcept>
#include <string>

namespace srn {

/// Invalid user-supplied parameter (bad r, empty class count, p < 1, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A precondition on structured input was violated (unsorted filtration,
/// dimension mismatch, point at infinity).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The brute-force oracle refuses instances above its enumeration limit.
class SizeLimitError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Training produced a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace srn
