#pragma once

#include <stdexcept>
#include <string>

namespace mnar {

// Shape mismatch between operands, or an index/rank outside the valid range.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// A scalar argument outside its admissible range (probability, tolerance, ...).
class ParameterError : public std::runtime_error {
 public:
  explicit ParameterError(const std::string& what) : std::runtime_error(what) {}
};

// A matrix or design whose span is too small for the requested operation.
class RankDeficiencyError : public std::runtime_error {
 public:
  explicit RankDeficiencyError(const std::string& what) : std::runtime_error(what) {}
};

// An iterative method hit its iteration cap before reaching its certificate.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Input data unusable (no observed entries, empty result set, ...).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// File or format problem while reading/writing CSV or JSON.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mnar
