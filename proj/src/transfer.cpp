#include "mnar/transfer.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <vector>

#include "mnar/errors.hpp"
#include "mnar/linalg.hpp"
#include "mnar/rng.hpp"

namespace mnar {

namespace {

using nlohmann::json;

Matrix gaussian_matrix(int rows, int cols, Rng& rng) {
  Matrix g(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) g(i, j) = rng.normal();
  }
  return g;
}

// Orthonormal basis of the column span of a tall Gaussian draw; the R-factor
// diagonal is made positive so the result is a deterministic function of G.
Matrix orthonormalize(const Matrix& g) {
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(g.rows(), g.cols());
  Matrix r = q.transpose() * g;
  for (int k = 0; k < g.cols(); ++k) {
    if (r(k, k) < 0.0) q.col(k) = -q.col(k);
  }
  return q;
}

Matrix random_rotation(int d, Rng& rng) {
  return orthonormalize(gaussian_matrix(d, d, rng));
}

Matrix permutation_matrix(const std::vector<int>& perm) {
  const int d = static_cast<int>(perm.size());
  Matrix p = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) p(perm[static_cast<std::size_t>(i)], i) = 1.0;
  return p;
}

// Row memberships drawn uniformly over blocks; retried until every block
// is nonempty (can fail only at very small sizes).
std::vector<int> draw_memberships(int rows, int d, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<int> member(static_cast<std::size_t>(rows));
    std::vector<int> count(static_cast<std::size_t>(d), 0);
    for (int i = 0; i < rows; ++i) {
      member[static_cast<std::size_t>(i)] = rng.uniform_int(d);
      ++count[static_cast<std::size_t>(member[static_cast<std::size_t>(i)])];
    }
    bool ok = true;
    for (int b = 0; b < d; ++b) {
      if (count[static_cast<std::size_t>(b)] == 0) ok = false;
    }
    if (ok) return member;
  }
  throw DataError("gen_partition: a block stayed empty after 100 retries");
}

Matrix membership_matrix(const std::vector<int>& member, int d) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(member.size()), d);
  for (std::size_t i = 0; i < member.size(); ++i) {
    m(static_cast<Eigen::Index>(i), member[i]) = 1.0;
  }
  return m;
}

}  // namespace

TransferPair gen_coherent(int n, int d, std::uint64_t seed) {
  if (d < 1 || d > n) {
    throw DimensionError("gen_coherent: need 1 <= d <= n");
  }
  TransferPair pair;
  pair.model = "coherent";
  pair.seed = seed;

  pair.U = Matrix::Zero(n, d);
  pair.V = Matrix::Zero(n, d);
  for (int i = 0; i < d; ++i) {
    pair.U(i, i) = 1.0;
    pair.V(n - 1 - i, i) = 1.0;
  }

  Rng spectra(seed, Stream::kSingularValues);
  pair.sigma_p = Vector(d);
  Vector sigma_q(d);
  for (int i = 0; i < d; ++i) pair.sigma_p(i) = spectra.uniform(0.5, 1.0);
  for (int i = 0; i < d; ++i) sigma_q(i) = spectra.uniform(0.5, 1.0);

  pair.T1 = Matrix::Identity(d, d);
  pair.T2 = Matrix::Identity(d, d);
  pair.R = sigma_q.asDiagonal();

  pair.P = pair.U * pair.sigma_p.asDiagonal() * pair.V.transpose();
  pair.Q = pair.U * sigma_q.asDiagonal() * pair.V.transpose();
  return pair;
}

TransferPair gen_partition(int m, int n, int d, double a, double b,
                           std::uint64_t seed) {
  if (d < 1 || d > std::min(m, n)) {
    throw DimensionError("gen_partition: need 1 <= d <= min(m, n)");
  }
  if (a < 0.0 || b < 0.0) {
    throw ParameterError("gen_partition: a and b must be nonnegative");
  }
  TransferPair pair;
  pair.model = "partition";
  pair.seed = seed;
  pair.params = {{"a", a}, {"b", b}};

  Rng row_rng(seed, Stream::kRowMembership);
  Rng col_rng(seed, Stream::kColMembership);
  const std::vector<int> row_member = draw_memberships(m, d, row_rng);
  const std::vector<int> col_member = draw_memberships(n, d, col_rng);
  const Matrix u_part = membership_matrix(row_member, d);
  const Matrix v_part = membership_matrix(col_member, d);

  Rng block_rng(seed, Stream::kBlockValues);
  Matrix b_p(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) b_p(i, j) = block_rng.uniform(0.0, b);
  }
  b_p.diagonal().array() += a;

  Rng perm_rng(seed, Stream::kPermutations);
  std::vector<int> perm1(static_cast<std::size_t>(d));
  std::vector<int> perm2(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) perm1[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < d; ++i) perm2[static_cast<std::size_t>(i)] = i;
  perm_rng.shuffle(perm1);
  perm_rng.shuffle(perm2);
  const Matrix pi1 = permutation_matrix(perm1);
  const Matrix pi2 = permutation_matrix(perm2);

  // Orthonormalize memberships: columns scaled by 1/sqrt(block size), block
  // sizes absorbed into the middle factor, then rotated into SVD form so
  // sigma_p is diagonal.
  Vector row_scale(d), col_scale(d);
  for (int k = 0; k < d; ++k) {
    row_scale(k) = std::sqrt(u_part.col(k).sum());
    col_scale(k) = std::sqrt(v_part.col(k).sum());
  }
  const Matrix u_on = u_part * row_scale.cwiseInverse().asDiagonal();
  const Matrix v_on = v_part * col_scale.cwiseInverse().asDiagonal();
  const Matrix core_p = row_scale.asDiagonal() * b_p * col_scale.asDiagonal();
  const Matrix core_q = row_scale.asDiagonal() * pi1 * b_p * pi2.transpose() *
                        col_scale.asDiagonal();

  Eigen::JacobiSVD<Matrix> svd(core_p,
                               Eigen::ComputeFullU | Eigen::ComputeFullV);
  pair.U = u_on * svd.matrixU();
  pair.V = v_on * svd.matrixV();
  pair.sigma_p = svd.singularValues();
  pair.T1 = svd.matrixU().transpose();
  pair.T2 = svd.matrixV().transpose();
  pair.R = core_q;

  pair.P = u_part * b_p * v_part.transpose();
  pair.Q = u_part * pi1 * b_p * pi2.transpose() * v_part.transpose();
  return pair;
}

TransferPair gen_general(int m, int n, int d, const ShiftSpec& shift,
                         std::uint64_t seed) {
  if (d < 1 || d > std::min(m, n)) {
    throw DimensionError("gen_general: need 1 <= d <= min(m, n)");
  }
  TransferPair pair;
  pair.model = "general";
  pair.seed = seed;
  pair.params = {{"shift_kind", static_cast<double>(shift.kind)},
                 {"shift_magnitude", shift.magnitude}};

  Rng factors(seed, Stream::kFactors);
  pair.U = orthonormalize(gaussian_matrix(m, d, factors));
  pair.V = orthonormalize(gaussian_matrix(n, d, factors));

  Rng spectra(seed, Stream::kSingularValues);
  pair.sigma_p = Vector(d);
  for (int i = 0; i < d; ++i) pair.sigma_p(i) = spectra.uniform(0.5, 1.0);

  Rng shift_rng(seed, Stream::kShift);
  auto make_shift = [&]() -> Matrix {
    switch (shift.kind) {
      case ShiftKind::kIdentity:
        return shift.magnitude * Matrix::Identity(d, d);
      case ShiftKind::kRotation:
        return random_rotation(d, shift_rng);
      case ShiftKind::kGeneral: {
        Matrix t = gaussian_matrix(d, d, shift_rng);
        return (shift.magnitude / norm_op(t)) * t;
      }
    }
    throw ParameterError("gen_general: unknown shift kind");
  };
  pair.T1 = make_shift();
  pair.T2 = make_shift();

  Matrix r = gaussian_matrix(d, d, shift_rng);
  pair.R = r / norm_op(r);

  pair.P = pair.U * pair.sigma_p.asDiagonal() * pair.V.transpose();
  pair.Q = pair.U * pair.T1 * pair.R * pair.T2.transpose() *
           pair.V.transpose();
  return pair;
}

ErrorDecomposition error_decomposition(const TransferPair& pair,
                                       const Matrix& uhat,
                                       const Matrix& vhat) {
  if (uhat.rows() != pair.U.rows() || uhat.cols() != pair.U.cols() ||
      vhat.rows() != pair.V.rows() || vhat.cols() != pair.V.cols()) {
    throw DimensionError("error_decomposition: feature shapes do not match");
  }
  const Matrix w_u = procrustes_align(pair.U, uhat).W;
  const Matrix w_v = procrustes_align(pair.V, vhat).W;

  ErrorDecomposition out;
  out.M = w_u.transpose() * pair.T1 * pair.R * pair.T2.transpose() * w_v;
  out.E = pair.Q - uhat * out.M * vhat.transpose();
  return out;
}

void save_pair(const TransferPair& pair, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_csv(pair.P, dir + "/P.csv");
  write_csv(pair.Q, dir + "/Q.csv");
  write_csv(pair.U, dir + "/U.csv");
  write_csv(pair.V, dir + "/V.csv");
  write_csv(Matrix(pair.sigma_p.asDiagonal()), dir + "/Sigma_P.csv");
  write_csv(pair.T1, dir + "/T1.csv");
  write_csv(pair.T2, dir + "/T2.csv");
  write_csv(pair.R, dir + "/R.csv");

  json params = json::object();
  for (const auto& [key, value] : pair.params) params[key] = value;
  json manifest{{"m", pair.m()},
                {"n", pair.n()},
                {"d", pair.d()},
                {"model", pair.model},
                {"params", params},
                {"seed", pair.seed}};
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw IoError("cannot write " + dir + "/manifest.json");
  out << manifest.dump(2) << '\n';
}

TransferPair load_pair(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw IoError("cannot read " + dir + "/manifest.json");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw IoError(dir + "/manifest.json: " + e.what());
  }

  TransferPair pair;
  pair.P = read_csv(dir + "/P.csv");
  pair.Q = read_csv(dir + "/Q.csv");
  pair.U = read_csv(dir + "/U.csv");
  pair.V = read_csv(dir + "/V.csv");
  pair.sigma_p = read_csv(dir + "/Sigma_P.csv").diagonal();
  pair.T1 = read_csv(dir + "/T1.csv");
  pair.T2 = read_csv(dir + "/T2.csv");
  pair.R = read_csv(dir + "/R.csv");
  pair.model = manifest.value("model", "from_files");
  pair.seed = manifest.value("seed", std::uint64_t{0});
  if (manifest.contains("params")) {
    for (const auto& [key, value] : manifest.at("params").items()) {
      if (value.is_number()) pair.params[key] = value.get<double>();
    }
  }
  return pair;
}

}  // namespace mnar
