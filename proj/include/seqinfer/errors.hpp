#pragma once

#include <stdexcept>
#include <string>

namespace seqinfer {

// Incompatible tensor shapes or sequence lengths.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition on argument values was violated.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation invalid in the current object state (e.g. backward twice).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Softmax slice with no finite entry; a fully masked attention row.
class DegenerateSliceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Sequence shorter than a convolution window.
class WindowError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed dependency tree (cycle, missing or duplicate root, bad head).
class TreeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input file; carries the 1-based line number when known.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Word not present in an embedding store.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace seqinfer
