#pragma once

#include <utility>

#include "mnar/matrix.hpp"

namespace mnar {

// Top-d singular triplet. U is m x d and V is n x d with orthonormal
// columns; singular values are sorted nonincreasing.
struct SvdTriple {
  Matrix U;
  Vector sigma;
  Matrix V;

  Matrix reconstruct() const { return U * sigma.asDiagonal() * V.transpose(); }
};

// Orthogonal alignment of Uhat onto U: W is the sign matrix of U^T Uhat
// (the polar factor), dist = max row 2-norm of Uhat - U W. This is an
// upper bound on the true rotation infimum, which is not computed.
struct ProcrustesResult {
  Matrix W;
  double dist = 0.0;
};

// Best rank-d approximation (Eckart-Young). Singular-vector signs are fixed
// so the largest-magnitude entry of each U column is positive. Ties in
// singular values may return any valid basis; compare subspaces, not vectors.
SvdTriple rank_d_svd(const Matrix& a, int d);

Matrix kron(const Matrix& a, const Matrix& b);

// Column-stacking vectorization and its inverse.
Vector vec(const Matrix& x);
Matrix unvec(const Vector& v, int rows, int cols);

double norm_max(const Matrix& a);
double norm_fro(const Matrix& a);
double norm_op(const Matrix& a);
double norm_two_to_inf(const Matrix& a);

// Left/right incoherence of the rank-d factors of M, each in [1, dim/d].
std::pair<double, double> incoherence(const Matrix& m, int d);

// Polar factor U_Z V_Z^T of a square matrix. For rank-deficient Z the SVD
// basis (hence the result) is not unique; any valid choice is returned.
Matrix sign_matrix(const Matrix& z);

ProcrustesResult procrustes_align(const Matrix& u, const Matrix& uhat);

// max |U^T U - I|; convenience for orthonormality checks in callers/tests.
double orthonormality_defect(const Matrix& u);

}  // namespace mnar
