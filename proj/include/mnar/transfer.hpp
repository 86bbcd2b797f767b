#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mnar/matrix.hpp"

namespace mnar {

// Source/target pair with its generating factors. Always satisfies
//   P = U * diag(sigma_p) * V^T        (to 1e-10 in max norm)
//   Q = U * T1 * R * T2^T * V^T        (to 1e-10 in max norm)
// with U, V orthonormal, so rank(P) <= d and rank(Q) <= d.
struct TransferPair {
  Matrix P;          // m x n
  Matrix Q;          // m x n
  Matrix U;          // m x d, orthonormal columns
  Matrix V;          // n x d, orthonormal columns
  Vector sigma_p;    // d nonnegative
  Matrix T1, T2, R;  // d x d latent shift

  int m() const { return static_cast<int>(P.rows()); }
  int n() const { return static_cast<int>(P.cols()); }
  int d() const { return static_cast<int>(U.cols()); }

  // Generator bookkeeping, carried into the on-disk manifest.
  std::string model;
  std::uint64_t seed = 0;
  std::map<std::string, double> params;
};

enum class ShiftKind { kIdentity, kRotation, kGeneral };

// Operator-norm scale of the latent shift matrices T1, T2.
struct ShiftSpec {
  ShiftKind kind = ShiftKind::kIdentity;
  double magnitude = 1.0;
};

// Stylized maximally coherent square pair: U and V are canonical basis
// columns (V reversed), both spectra drawn i.i.d. Uniform[0.5, 1], and the
// shift is a pure spectrum change (T1 = T2 = I, R = diag of target spectrum).
TransferPair gen_coherent(int n, int d, std::uint64_t seed);

// Block-membership pair: each row/column belongs to one of d uniform random
// blocks, block values are Uniform[0, b] plus `a` on the diagonal, and the
// target permutes the block structure on both sides. Factors are stored in
// SVD form (memberships orthonormalized, block values absorbed into the
// middle), so the TransferPair identities hold exactly.
TransferPair gen_partition(int m, int n, int d, double a, double b,
                           std::uint64_t seed);

// Generic random instance: orthonormalized Gaussian factors, spectrum
// Uniform[0.5, 1], T1/T2 per ShiftSpec, R Gaussian rescaled to unit
// operator norm.
TransferPair gen_general(int m, int n, int d, const ShiftSpec& shift,
                         std::uint64_t seed);

// Exact split of the target against a chosen feature basis:
//   Q = Uhat * M * Vhat^T + E
// with M = W_U^T T1 R T2^T W_V for the Procrustes rotations W_U, W_V.
struct ErrorDecomposition {
  Matrix M;  // d x d
  Matrix E;  // m x n
};

ErrorDecomposition error_decomposition(const TransferPair& pair,
                                       const Matrix& uhat, const Matrix& vhat);

// Directory layout: P.csv, Q.csv, U.csv, V.csv, Sigma_P.csv, T1.csv,
// T2.csv, R.csv plus manifest.json {m, n, d, model, params, seed}.
void save_pair(const TransferPair& pair, const std::string& dir);
TransferPair load_pair(const std::string& dir);

}  // namespace mnar
