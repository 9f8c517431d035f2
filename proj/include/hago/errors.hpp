#pragma once

#include <stdexcept>
#include <string>

namespace hago {

// Error taxonomy. The CLI maps these onto process exit codes:
//   input_error (and subclasses) -> 2, artifact_error -> 3,
//   query_error -> 4, numeric_error -> 5.
class input_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number.
class parse_error : public input_error {
 public:
  parse_error(const std::string& what, std::size_t line)
      : input_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Invalid configuration value or inconsistent option combination.
class config_error : public input_error {
 public:
  using input_error::input_error;
};

// Missing, stale, or corrupted pipeline artifact (checkpoint, manifest).
class artifact_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lookup of an unknown entity (e.g. raw item ID in analysis queries).
class query_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values, zero norms, degenerate numerics.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken internal invariant; indicates a bug, not bad user input.
class invariant_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class shape_error : public invariant_error {
 public:
  using invariant_error::invariant_error;
};

}  // namespace hago
