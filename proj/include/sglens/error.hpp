#pragma once

#include <stdexcept>
#include <string>

namespace sglens {

// Shape or dimension contract violated by an operation's inputs.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid hyperparameters, or a model/file that does not match the configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A request argument is outside its documented bounds.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Autodiff misuse: backward() on a non-scalar, or outside an active tape.
class AutodiffError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Training diverged (non-finite loss).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sglens
