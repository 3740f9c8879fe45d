#pragma once

#include <stdexcept>
#include <string>

namespace hyloc {

/// Invalid argument value (negative sigma, empty input, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Query outside the domain of a container (e.g. time outside a trajectory).
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Degenerate anchor geometry: too few anchors or a collinear set.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shape mismatch. The message names both offending shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Config or data failed a schema / semantic check.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file content. Carries the 1-based line where parsing failed.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, int line)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or a diverging numerical procedure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hyloc
