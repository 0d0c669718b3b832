#pragma once

#include <stdexcept>
#include <string>

namespace mazeadapt {

// Base class for every error the library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform. Messages name both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// A forward op or evaluation produced NaN/Inf.
struct NumericError : Error {
  using Error::Error;
};

// API misuse: mismatched layouts, empty task lists, out-of-range arguments.
struct ContractError : Error {
  using Error::Error;
};

// Lifecycle misuse, e.g. a second backward pass on a consumed tape.
struct StateError : Error {
  using Error::Error;
};

// Malformed serialized input.
struct ParseError : Error {
  using Error::Error;
};

// Maze generation could not satisfy its constraints within the retry budget.
struct GenerationError : Error {
  using Error::Error;
};

// Training left the finite domain.
struct TrainingError : Error {
  using Error::Error;
};

}  // namespace mazeadapt
