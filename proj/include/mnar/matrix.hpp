#pragma once

#include <Eigen/Dense>
#include <string>

namespace mnar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Missing entries of a partially observed matrix are marked NaN, both
// in memory and as the literal token "NaN" in CSV files.
inline bool is_missing(double x) { return std::isnan(x); }

bool all_finite(const Matrix& a);

// Throws DimensionError unless the shape matches, ParameterError on NaN/Inf.
void require_finite(const Matrix& a, const std::string& name);

// Fraction of non-missing entries.
double observed_fraction(const Matrix& masked);

// Copy with missing entries replaced by zero.
Matrix zero_filled(const Matrix& masked);

// Plain CSV, one matrix row per line, no header; NaN marks missing entries.
void write_csv(const Matrix& a, const std::string& path);
Matrix read_csv(const std::string& path);

}  // namespace mnar
