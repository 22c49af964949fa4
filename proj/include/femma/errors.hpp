#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace femma {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand extents do not line up for a contraction or GEMM.
struct ShapeError : Error {
  using Error::Error;
};

// An index mapping leaves a problem index uncovered or covers it twice.
struct CoverageError : Error {
  std::vector<std::string> offending;
  CoverageError(const std::string& what, std::vector<std::string> items)
      : Error(what), offending(std::move(items)) {}
};

struct AlignmentError : Error {
  using Error::Error;
};

struct LayoutError : Error {
  using Error::Error;
};

struct GeometryError : Error {
  using Error::Error;
};

struct DivergenceError : Error {
  long step;
  DivergenceError(const std::string& what, long step_index)
      : Error(what), step(step_index) {}
};

struct ParseError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace femma
