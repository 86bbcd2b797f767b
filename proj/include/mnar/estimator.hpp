#pragma once

#include <string>

#include "mnar/matrix.hpp"
#include "mnar/sampling.hpp"

namespace mnar {

// Orthonormal row/column feature bases extracted from the observed source,
// plus the singular values of the source estimate.
struct SpectralFeatures {
  Matrix Uhat;       // m x d
  Matrix Vhat;       // n x d
  Vector sigma_hat;  // d

  int m() const { return static_cast<int>(Uhat.rows()); }
  int n() const { return static_cast<int>(Vhat.rows()); }
  int d() const { return static_cast<int>(Uhat.cols()); }
};

// Fitted latent coefficient matrix with the per-side Grams of the normal
// equations kept for diagnostics. ridge_used is 0 when the exact solve
// succeeded without regularization.
struct ThetaEstimate {
  Matrix Theta;      // d x d
  Matrix gram_row;   // sum_i c_i uhat_i uhat_i^T
  Matrix gram_col;   // sum_j c_j vhat_j vhat_j^T
  double ridge_used = 0.0;
};

struct FitOptions {
  // When the Gram condition number exceeds 1e12, add 1e-8 * trace / d to it
  // instead of failing. Disable to get hard rank-deficiency errors.
  bool allow_ridge = true;
};

// Zero-fill missing entries, rescale by the inverse observed fraction, and
// take the rank-d SVD. On a fully observed source this is exactly the
// rank-d SVD.
SpectralFeatures extract_features(const Matrix& source_obs, int d);

// Closed-form least squares exploiting the product structure of the
// observations (passive mask or active row/column multiset):
// Theta = W2^{-1} S W1^{-1} with S accumulating every record once.
ThetaEstimate fit_theta_product(const SpectralFeatures& features,
                                const ObservationSet& obs,
                                const FitOptions& options = {});

// Reference path: solves the d^2 x d^2 vectorized normal equations built
// record by record. Used as the oracle for fit_theta_product.
ThetaEstimate fit_theta_direct(const SpectralFeatures& features,
                               const ObservationSet& obs,
                               const FitOptions& options = {});

// Qhat = Uhat * Theta * Vhat^T; rank at most d by construction.
Matrix predict(const SpectralFeatures& features, const ThetaEstimate& theta);

// Rank-d truncation of the per-cell blend
//   w_p / (w_p + w_q) * source + w_q / (w_p + w_q) * target   (cell observed)
//   source                                                    (otherwise)
// where the source is inverse-propensity zero-filled if partially observed.
Matrix baseline_lll22(const Matrix& source_obs, const ObservationSet& target_obs,
                      int d, double w_p, double w_q);

// Inverse-variance weights for the blend, with variances estimated from
// residuals to rank-d truncations (source: full matrix; target: the dense
// observed submatrix). Floored at 1e-12 so noiseless inputs give finite
// weights.
std::pair<double, double> estimate_lll22_weights(const Matrix& source_obs,
                                                 const ObservationSet& target_obs,
                                                 int d);

struct Metrics {
  double max_sq = 0.0;  // squared max-norm of the error
  double mse = 0.0;     // squared Frobenius norm over m * n
};

Metrics metrics(const Matrix& qhat, const Matrix& q);

// Theta.csv + manifest.json {d, ridge_used, gram condition numbers}.
void save_theta(const ThetaEstimate& theta, const std::string& dir);

}  // namespace mnar
