#pragma once

#include <string>
#include <vector>

#include "mnar/matrix.hpp"

namespace mnar {

// Probability distribution over a finite set of covariate vectors
// (the rows of the matrix passed alongside it).
struct Design {
  std::vector<double> weights;  // nonnegative, sums to 1 (+-1e-12)

  // Indices with weight above support_tol, ascending.
  std::vector<int> support() const;

  static constexpr double kSupportTol = 1e-9;
};

struct KwCertificate {
  double g = 0.0;        // worst-case predictive variance, >= d when spanning
  double eps_hat = 0.0;  // g / d - 1
};

// Options for the Frank-Wolfe design solver. The stopping rule is the
// Kiefer-Wolfowitz certificate g <= (1 + eps) * d; any trajectory reaching
// it is acceptable.
struct FrankWolfeOptions {
  double eps = 0.01;
  int max_iter = 10000;
  bool prune = true;

  // When set, receives log det V(pi_k) for every iterate visited.
  std::vector<double>* log_det_trace = nullptr;
};

// Gram V(pi) = sum_i w_i a_i a_i^T for row vectors a_i.
Matrix design_gram(const Design& design, const Matrix& vectors);

// max_a a^T V(pi)^{-1} a over the vector set. Throws RankDeficiencyError
// when the design's support does not span R^d.
double g_value(const Design& design, const Matrix& vectors);

// Computes a design with g <= (1 + eps) * d. Starts from uniform weights on
// a greedily chosen spanning subset; each step moves mass toward the vector
// with the largest variance, with the line-search step size
// gamma = (g/d - 1) / (g - 1). After convergence, weights below the support
// tolerance are zeroed and atoms whose removal keeps g <= (1 + 2 eps) * d
// are dropped.
Design frank_wolfe_design(const Matrix& vectors, double eps, int max_iter);
Design frank_wolfe_design(const Matrix& vectors,
                          const FrankWolfeOptions& options);

// Product design pi(i, j) = rho(i) * zeta(j) over flat index i * n + j.
Design tensor_design(const Design& rho, const Design& zeta, int m, int n);

KwCertificate kw_certificate(const Design& design, const Matrix& vectors);

// Rows of the joint covariate set for cell (i, j): the Kronecker product of
// column feature j with row feature i, at flat index i * n + j. Matches the
// index convention of tensor_design.
Matrix kron_feature_rows(const Matrix& u, const Matrix& v);

// JSON {indices, weights, g_value, eps_hat}; weights are the support weights.
void save_design(const Design& design, const Matrix& vectors,
                 const std::string& path);
Design load_design(const std::string& path, int n_vectors);

}  // namespace mnar
