#include "mnar/matrix.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "mnar/errors.hpp"

namespace mnar {

bool all_finite(const Matrix& a) { return a.allFinite(); }

void require_finite(const Matrix& a, const std::string& name) {
  if (!a.allFinite()) {
    throw ParameterError(name + ": entries must be finite (no NaN/Inf)");
  }
}

double observed_fraction(const Matrix& masked) {
  if (masked.size() == 0) return 0.0;
  Eigen::Index seen = 0;
  for (Eigen::Index j = 0; j < masked.cols(); ++j) {
    for (Eigen::Index i = 0; i < masked.rows(); ++i) {
      if (!is_missing(masked(i, j))) ++seen;
    }
  }
  return static_cast<double>(seen) / static_cast<double>(masked.size());
}

Matrix zero_filled(const Matrix& masked) {
  Matrix out = masked;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      if (is_missing(out(i, j))) out(i, j) = 0.0;
    }
  }
  return out;
}

void write_csv(const Matrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  char buf[40];
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j > 0) out << ',';
      if (is_missing(a(i, j))) {
        out << "NaN";
      } else {
        // %.17g round-trips doubles exactly.
        std::snprintf(buf, sizeof(buf), "%.17g", a(i, j));
        out << buf;
      }
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Matrix read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (cell == "NaN" || cell == "nan") {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        try {
          std::size_t used = 0;
          const double v = std::stod(cell, &used);
          row.push_back(v);
        } catch (const std::exception&) {
          throw IoError(path + ": malformed numeric cell '" + cell + "'");
        }
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError(path + ": ragged rows (line " +
                    std::to_string(rows.size() + 1) + ")");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path + ": empty matrix file");
  Matrix a(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      a(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return a;
}

}  // namespace mnar
