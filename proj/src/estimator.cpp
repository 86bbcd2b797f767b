#include "mnar/estimator.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "mnar/errors.hpp"
#include "mnar/linalg.hpp"

namespace mnar {

namespace {

using nlohmann::json;

constexpr double kCondLimit = 1e12;

double condition_number(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(es.eigenvalues().size() - 1);
  if (hi <= 0.0 || lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

// Symmetric PSD inverse with the module's ridge policy. `side` names which
// Gram failed when ridge is disabled.
Matrix invert_psd(Matrix gram, const FitOptions& options, const char* side,
                  double* ridge_used) {
  const Eigen::Index d = gram.rows();
  if (condition_number(gram) > kCondLimit) {
    if (!options.allow_ridge) {
      throw RankDeficiencyError(
          std::string("fit_theta: ") + side +
          " gram is rank-deficient (too few distinct " + side + " sampled)");
    }
    double lam = 1e-8 * gram.trace() / static_cast<double>(d);
    if (lam <= 0.0) lam = 1e-30;
    gram.diagonal().array() += lam;
    *ridge_used = std::max(*ridge_used, lam);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  return es.eigenvectors() *
         es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

// Per-side observation counts: mask bits for passive sets, draw
// multiplicities for active ones.
void side_counts(const ObservationSet& obs, Vector& row_c, Vector& col_c) {
  if (obs.kind == ObservationSet::Kind::kPassive) {
    row_c = Vector::Zero(static_cast<Eigen::Index>(obs.mask.eta.size()));
    col_c = Vector::Zero(static_cast<Eigen::Index>(obs.mask.nu.size()));
    for (std::size_t i = 0; i < obs.mask.eta.size(); ++i) {
      row_c(static_cast<Eigen::Index>(i)) = obs.mask.eta[i];
    }
    for (std::size_t j = 0; j < obs.mask.nu.size(); ++j) {
      col_c(static_cast<Eigen::Index>(j)) = obs.mask.nu[j];
    }
  } else {
    row_c = Vector::Zero(static_cast<Eigen::Index>(obs.sample.row_mult.size()));
    col_c = Vector::Zero(static_cast<Eigen::Index>(obs.sample.col_mult.size()));
    for (std::size_t i = 0; i < obs.sample.row_mult.size(); ++i) {
      row_c(static_cast<Eigen::Index>(i)) = obs.sample.row_mult[i];
    }
    for (std::size_t j = 0; j < obs.sample.col_mult.size(); ++j) {
      col_c(static_cast<Eigen::Index>(j)) = obs.sample.col_mult[j];
    }
  }
}

void check_obs_shape(const SpectralFeatures& features,
                     const ObservationSet& obs) {
  Eigen::Index rows, cols;
  if (obs.kind == ObservationSet::Kind::kPassive) {
    rows = obs.masked.rows();
    cols = obs.masked.cols();
  } else {
    rows = static_cast<Eigen::Index>(obs.sample.row_mult.size());
    cols = static_cast<Eigen::Index>(obs.sample.col_mult.size());
  }
  if (rows != features.Uhat.rows() || cols != features.Vhat.rows()) {
    throw DimensionError("fit_theta: observations do not match feature shapes");
  }
}

// S = sum over records of uhat_i * value * vhat_j^T.
Matrix moment_matrix(const SpectralFeatures& features,
                     const ObservationSet& obs) {
  const int d = features.d();
  Matrix s = Matrix::Zero(d, d);
  if (obs.kind == ObservationSet::Kind::kPassive) {
    for (Eigen::Index i = 0; i < obs.masked.rows(); ++i) {
      for (Eigen::Index j = 0; j < obs.masked.cols(); ++j) {
        const double y = obs.masked(i, j);
        if (is_missing(y)) continue;
        s.noalias() +=
            features.Uhat.row(i).transpose() * y * features.Vhat.row(j);
      }
    }
  } else {
    for (const auto& rec : obs.records) {
      s.noalias() += features.Uhat.row(rec.i).transpose() * rec.value *
                     features.Vhat.row(rec.j);
    }
  }
  return s;
}

}  // namespace

SpectralFeatures extract_features(const Matrix& source_obs, int d) {
  const double phat = observed_fraction(source_obs);
  if (phat <= 0.0) throw DataError("extract_features: no observed entries");
  if (d > std::min(source_obs.rows(), source_obs.cols())) {
    throw DimensionError("extract_features: d exceeds matrix dimensions");
  }
  const Matrix filled = zero_filled(source_obs) / phat;
  const SvdTriple svd = rank_d_svd(filled, d);
  return {svd.U, svd.V, svd.sigma};
}

ThetaEstimate fit_theta_product(const SpectralFeatures& features,
                                const ObservationSet& obs,
                                const FitOptions& options) {
  check_obs_shape(features, obs);

  Vector row_c, col_c;
  side_counts(obs, row_c, col_c);

  ThetaEstimate est;
  est.gram_row = features.Uhat.transpose() * row_c.asDiagonal() * features.Uhat;
  est.gram_col = features.Vhat.transpose() * col_c.asDiagonal() * features.Vhat;

  const Matrix w2_inv = invert_psd(est.gram_row, options, "rows", &est.ridge_used);
  const Matrix w1_inv = invert_psd(est.gram_col, options, "cols", &est.ridge_used);
  const Matrix s = moment_matrix(features, obs);
  est.Theta = w2_inv * s * w1_inv;
  return est;
}

ThetaEstimate fit_theta_direct(const SpectralFeatures& features,
                               const ObservationSet& obs,
                               const FitOptions& options) {
  check_obs_shape(features, obs);
  const int d = features.d();
  const int dd = d * d;

  Matrix a = Matrix::Zero(dd, dd);
  Vector b = Vector::Zero(dd);
  auto accumulate = [&](int i, int j, double y, double mult) {
    Vector phi(dd);
    for (int col = 0; col < d; ++col) {
      for (int row = 0; row < d; ++row) {
        phi(col * d + row) = features.Vhat(j, col) * features.Uhat(i, row);
      }
    }
    a.noalias() += mult * phi * phi.transpose();
    b.noalias() += mult * y * phi;
  };

  if (obs.kind == ObservationSet::Kind::kPassive) {
    for (Eigen::Index i = 0; i < obs.masked.rows(); ++i) {
      for (Eigen::Index j = 0; j < obs.masked.cols(); ++j) {
        const double y = obs.masked(i, j);
        if (!is_missing(y)) {
          accumulate(static_cast<int>(i), static_cast<int>(j), y, 1.0);
        }
      }
    }
  } else {
    for (const auto& rec : obs.records) {
      accumulate(rec.i, rec.j, rec.value, 1.0);
    }
  }

  ThetaEstimate est;
  Vector row_c, col_c;
  side_counts(obs, row_c, col_c);
  est.gram_row = features.Uhat.transpose() * row_c.asDiagonal() * features.Uhat;
  est.gram_col = features.Vhat.transpose() * col_c.asDiagonal() * features.Vhat;

  if (condition_number(a) > kCondLimit) {
    if (!options.allow_ridge) {
      throw RankDeficiencyError(
          "fit_theta_direct: design matrix rank below d^2");
    }
    double lam = 1e-8 * a.trace() / static_cast<double>(dd);
    if (lam <= 0.0) lam = 1e-30;
    a.diagonal().array() += lam;
    est.ridge_used = lam;
  }
  const Vector theta_vec = a.ldlt().solve(b);
  est.Theta = unvec(theta_vec, d, d);
  return est;
}

Matrix predict(const SpectralFeatures& features, const ThetaEstimate& theta) {
  if (theta.Theta.rows() != features.d() || theta.Theta.cols() != features.d()) {
    throw DimensionError("predict: Theta does not match feature rank");
  }
  return features.Uhat * theta.Theta * features.Vhat.transpose();
}

Matrix baseline_lll22(const Matrix& source_obs, const ObservationSet& target_obs,
                      int d, double w_p, double w_q) {
  if (target_obs.kind != ObservationSet::Kind::kPassive) {
    throw ParameterError("baseline_lll22: expects a passive observation set");
  }
  if (!(w_p > 0.0) || !(w_q > 0.0)) {
    throw ParameterError("baseline_lll22: weights must be positive");
  }
  const Matrix& target = target_obs.masked;
  if (source_obs.rows() != target.rows() || source_obs.cols() != target.cols()) {
    throw DimensionError("baseline_lll22: shape mismatch");
  }

  // Missing source entries are inverse-propensity zero-filled before use.
  const double phat = observed_fraction(source_obs);
  if (phat <= 0.0) throw DataError("baseline_lll22: empty source");
  const Matrix source = zero_filled(source_obs) / phat;

  const double blend_p = w_p / (w_p + w_q);
  const double blend_q = w_q / (w_p + w_q);
  Matrix q_prime = source;
  for (Eigen::Index i = 0; i < target.rows(); ++i) {
    for (Eigen::Index j = 0; j < target.cols(); ++j) {
      if (!is_missing(target(i, j))) {
        q_prime(i, j) = blend_p * source(i, j) + blend_q * target(i, j);
      }
    }
  }
  return rank_d_svd(q_prime, d).reconstruct();
}

std::pair<double, double> estimate_lll22_weights(const Matrix& source_obs,
                                                 const ObservationSet& target_obs,
                                                 int d) {
  constexpr double kVarFloor = 1e-12;

  const double phat = observed_fraction(source_obs);
  if (phat <= 0.0) throw DataError("estimate_lll22_weights: empty source");
  const Matrix source = zero_filled(source_obs) / phat;
  const Matrix source_lr = rank_d_svd(source, d).reconstruct();
  double var_p = 0.0;
  long count_p = 0;
  for (Eigen::Index i = 0; i < source.rows(); ++i) {
    for (Eigen::Index j = 0; j < source.cols(); ++j) {
      if (is_missing(source_obs(i, j))) continue;
      const double r = source(i, j) - source_lr(i, j);
      var_p += r * r;
      ++count_p;
    }
  }
  var_p = std::max(count_p > 0 ? var_p / count_p : kVarFloor, kVarFloor);

  // Target residuals against the rank-d truncation of the dense observed
  // submatrix (the passive mask always yields one).
  double var_q = kVarFloor;
  if (target_obs.kind == ObservationSet::Kind::kPassive) {
    std::vector<Eigen::Index> rows, cols;
    for (std::size_t i = 0; i < target_obs.mask.eta.size(); ++i) {
      if (target_obs.mask.eta[i]) rows.push_back(static_cast<Eigen::Index>(i));
    }
    for (std::size_t j = 0; j < target_obs.mask.nu.size(); ++j) {
      if (target_obs.mask.nu[j]) cols.push_back(static_cast<Eigen::Index>(j));
    }
    if (!rows.empty() && !cols.empty()) {
      Matrix sub(static_cast<Eigen::Index>(rows.size()),
                 static_cast<Eigen::Index>(cols.size()));
      for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = 0; b < cols.size(); ++b) {
          sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
              target_obs.masked(rows[a], cols[b]);
        }
      }
      const int r = std::min<int>(d, static_cast<int>(std::min(sub.rows(), sub.cols())));
      const Matrix sub_lr = rank_d_svd(sub, r).reconstruct();
      var_q = std::max((sub - sub_lr).squaredNorm() /
                           static_cast<double>(sub.size()),
                       kVarFloor);
    }
  }
  return {1.0 / var_p, 1.0 / var_q};
}

Metrics metrics(const Matrix& qhat, const Matrix& q) {
  if (qhat.rows() != q.rows() || qhat.cols() != q.cols()) {
    throw DimensionError("metrics: shape mismatch");
  }
  const Matrix diff = qhat - q;
  Metrics out;
  out.max_sq = norm_max(diff) * norm_max(diff);
  out.mse = diff.squaredNorm() / static_cast<double>(q.size());
  return out;
}

void save_theta(const ThetaEstimate& theta, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_csv(theta.Theta, dir + "/Theta.csv");
  json manifest{{"d", theta.Theta.rows()},
                {"ridge_used", theta.ridge_used},
                {"cond_gram_row", condition_number(theta.gram_row)},
                {"cond_gram_col", condition_number(theta.gram_col)}};
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw IoError("cannot write " + dir + "/manifest.json");
  out << manifest.dump(2) << '\n';
}

}  // namespace mnar
