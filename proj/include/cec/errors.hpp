#pragma once

#include <stdexcept>
#include <string>

namespace cec {

// Malformed input (bad shapes, negative workloads, unknown BS ids).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An execution vector that never delivers the task's workload.
class IncompleteExecution : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InstanceTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class BufferUnderfull : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A policy emitted an action that oversubscribes some BS. Always a bug.
class CapacityViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cec
