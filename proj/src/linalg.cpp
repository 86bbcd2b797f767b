#include "mnar/linalg.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <string>

#include "mnar/errors.hpp"

namespace mnar {

namespace {

// Dense SVD, deterministic. Jacobi is the most accurate for small sizes;
// divide-and-conquer takes over on larger inputs (it falls back to Jacobi
// internally below its own threshold).
void full_svd(const Matrix& a, Matrix& u, Vector& s, Matrix& v) {
  if (a.rows() <= 32 || a.cols() <= 32) {
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU();
    s = svd.singularValues();
    v = svd.matrixV();
  } else {
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU();
    s = svd.singularValues();
    v = svd.matrixV();
  }
}

}  // namespace

SvdTriple rank_d_svd(const Matrix& a, int d) {
  if (d < 1) throw DimensionError("rank_d_svd: d must be positive");
  if (d > std::min(a.rows(), a.cols())) {
    throw DimensionError("rank_d_svd: d = " + std::to_string(d) +
                         " exceeds min dimension " +
                         std::to_string(std::min(a.rows(), a.cols())));
  }
  require_finite(a, "rank_d_svd: input");

  Matrix u, v;
  Vector s;
  full_svd(a, u, s, v);

  SvdTriple out;
  out.U = u.leftCols(d);
  out.sigma = s.head(d);
  out.V = v.leftCols(d);

  // Reproducible sign convention: the largest-magnitude entry of each
  // left singular vector is made positive.
  for (int k = 0; k < d; ++k) {
    Eigen::Index imax = 0;
    out.U.col(k).cwiseAbs().maxCoeff(&imax);
    if (out.U(imax, k) < 0.0) {
      out.U.col(k) = -out.U.col(k);
      out.V.col(k) = -out.V.col(k);
    }
  }
  return out;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Vector vec(const Matrix& x) {
  // Eigen stores column-major, so this is exactly column stacking.
  return Eigen::Map<const Vector>(x.data(), x.size());
}

Matrix unvec(const Vector& v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw DimensionError("unvec: length " + std::to_string(v.size()) +
                         " does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

double norm_max(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

double norm_fro(const Matrix& a) { return a.norm(); }

double norm_op(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  // Largest singular value via the Gram of the smaller side.
  if (a.rows() >= a.cols()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a.transpose() * a);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(a * a.transpose());
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double norm_two_to_inf(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.rowwise().norm().maxCoeff();
}

std::pair<double, double> incoherence(const Matrix& m, int d) {
  const SvdTriple svd = rank_d_svd(m, d);
  const double scale = svd.sigma(0);
  if (svd.sigma(d - 1) <= 1e-12 * std::max(scale, 1.0)) {
    throw RankDeficiencyError("incoherence: sigma_d(M) is numerically zero");
  }
  const double mu_u = static_cast<double>(m.rows()) *
                      norm_two_to_inf(svd.U) * norm_two_to_inf(svd.U) / d;
  const double mu_v = static_cast<double>(m.cols()) *
                      norm_two_to_inf(svd.V) * norm_two_to_inf(svd.V) / d;
  return {mu_u, mu_v};
}

Matrix sign_matrix(const Matrix& z) {
  if (z.rows() != z.cols()) {
    throw DimensionError("sign_matrix: input must be square");
  }
  Eigen::JacobiSVD<Matrix> svd(z, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

ProcrustesResult procrustes_align(const Matrix& u, const Matrix& uhat) {
  if (u.rows() != uhat.rows() || u.cols() != uhat.cols()) {
    throw DimensionError("procrustes_align: shape mismatch");
  }
  ProcrustesResult out;
  out.W = sign_matrix(u.transpose() * uhat);
  out.dist = norm_two_to_inf(uhat - u * out.W);
  return out;
}

double orthonormality_defect(const Matrix& u) {
  Matrix g = u.transpose() * u;
  g.diagonal().array() -= 1.0;
  return norm_max(g);
}

}  // namespace mnar
