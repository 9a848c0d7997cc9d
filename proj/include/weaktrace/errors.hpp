#pragma once

#include <stdexcept>
#include <string>

namespace weaktrace {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input: circuit text, scenario file, meter configuration.
struct ValidationError : Error {
  using Error::Error;
};

/// A requested quantity does not exist for this pre/post-selection
/// (orthogonal states, vanishing post-selection probability).
struct UndefinedQuantity : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

enum class CircuitErrorKind {
  syntax,
  unknown_arm,
  cycle,
  duplicate_producer,
  duplicate_consumer,
  duplicate_name,
  missing_source,
  missing_detect,
  arity,
  invalid_detector,
};

const char* to_string(CircuitErrorKind kind);

class CircuitError : public ValidationError {
 public:
  CircuitError(CircuitErrorKind kind, std::string message, int line = 0, int column = 0);

  CircuitErrorKind kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  CircuitErrorKind kind_;
  int line_;
  int column_;
};

}  // namespace weaktrace
