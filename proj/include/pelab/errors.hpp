#pragma once

#include <stdexcept>
#include <string>

namespace pelab {

// Parameter outside its documented range (negative slope, malformed
// bucket boundaries, shape mismatch, ...).
class InvalidParameter : public std::invalid_argument {
 public:
  explicit InvalidParameter(const std::string& what)
      : std::invalid_argument(what) {}
};

// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

class EmptyInput : public std::invalid_argument {
 public:
  explicit EmptyInput(const std::string& what)
      : std::invalid_argument(what) {}
};

// Runtime input outside the declared contract (e.g. token id >= vocab).
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what)
      : std::invalid_argument(what) {}
};

// Query position 0 with no threshold: the normalizer degenerates.
class DegeneratePosition : public std::domain_error {
 public:
  explicit DegeneratePosition(const std::string& what)
      : std::domain_error(what) {}
};

// Softmax over a row with no unmasked entries.
class DegenerateRow : public std::domain_error {
 public:
  explicit DegenerateRow(const std::string& what)
      : std::domain_error(what) {}
};

// Gradient requested for a construction-only activation (step/power/cos).
class NonDifferentiableConfig : public std::invalid_argument {
 public:
  explicit NonDifferentiableConfig(const std::string& what)
      : std::invalid_argument(what) {}
};

// Theorem construction asked to cover a grid its target cannot reach.
class ConstructionOutOfRange : public std::invalid_argument {
 public:
  explicit ConstructionOutOfRange(const std::string& what)
      : std::invalid_argument(what) {}
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, long step)
      : std::runtime_error(what), step(step) {}
  long step;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pelab
