#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mnar/matrix.hpp"

namespace mnar {

// Bernoulli row/column masks; entry (i, j) is visible iff eta[i] = nu[j] = 1.
struct RowColMask {
  std::vector<std::uint8_t> eta;
  std::vector<std::uint8_t> nu;
  double p_row = 0.0;
  double p_col = 0.0;
};

// Budgeted i.i.d. row/column draws stored as multiplicity maps. The number
// of observations of cell (i, j) is row_mult[i] * col_mult[j].
struct ActiveSample {
  std::vector<int> row_mult;  // size m, sums to t_row
  std::vector<int> col_mult;  // size n, sums to t_col
  int t_row = 0;
  int t_col = 0;

  int count(int i, int j) const {
    return row_mult[static_cast<std::size_t>(i)] *
           col_mult[static_cast<std::size_t>(j)];
  }
};

// One noisy measurement of a cell; t = 1..n_ij indexes repeats.
struct ActiveRecord {
  int i = 0;
  int j = 0;
  int t = 0;
  double value = 0.0;
};

// Either a passive masked matrix or an active multiset of records.
struct ObservationSet {
  enum class Kind { kPassive, kActive };
  Kind kind = Kind::kPassive;

  // Passive: NaN where eta_i * nu_j = 0.
  Matrix masked;
  RowColMask mask;

  // Active: exactly count(i, j) records per cell with count > 0.
  std::vector<ActiveRecord> records;
  ActiveSample sample;
};

RowColMask passive_mask(int m, int n, double p_row, double p_col,
                        std::uint64_t seed);

ObservationSet observe_passive(const Matrix& q, const RowColMask& mask,
                               double sigma_q, std::uint64_t seed);

// weights must be valid probability vectors over [m] and [n].
ActiveSample active_draw(const std::vector<double>& rho,
                         const std::vector<double>& zeta, int t_row, int t_col,
                         std::uint64_t seed);

ObservationSet observe_active(const Matrix& q, const ActiveSample& sample,
                              double sigma_q, std::uint64_t seed);

// Whether the realized mask keeps the feature Gram close to its expectation:
// | ||D U||_op - sqrt(p) | <= sqrt(p) / 10 for D = diag(mask_vec).
bool nondegeneracy_check(const std::vector<std::uint8_t>& mask_vec,
                         const Matrix& u, double p);

// Entrywise MCAR masking of the source with additive Gaussian noise on the
// kept entries; missing entries are NaN.
Matrix mask_source_mcar(const Matrix& p_mat, double p, double sigma_p,
                        std::uint64_t seed);

// Passive sets round-trip through the masked-matrix CSV; active sets write
// records as i,j,t,value rows plus a JSON sidecar with budgets and
// multiplicities.
void save_observations(const ObservationSet& obs, const std::string& path);
ObservationSet load_observations(const std::string& path);

}  // namespace mnar
