#pragma once

#include "mnar/matrix.hpp"

namespace mnar {

// Deterministic subspace-recovery diagnostics for a rank-r estimate Phat of
// a rank-r matrix P. The lhs fields are the rotation-aligned two-to-infinity
// distances computed with the sign-matrix surrogate (an upper bound on the
// rotation infimum); the rhs fields are the entrywise-error bounds
//   (2 sqrt(n) + (2 + sqrt 2) sqrt(mn) ||U U^T||_{2->inf}) ||P - Phat||_max
//   ------------------------------------------------------------------------
//                              sigma_r(P)
// (and the m/V analogue on the right side). The inequality lhs <= rhs is
// only guaranteed when condition_ok, i.e. when
// sqrt(mn) ||Phat - P||_max <= sigma_r(P) / 2.
struct SsrReport {
  double lhs_left = 0.0;
  double lhs_right = 0.0;
  double rhs_left = 0.0;
  double rhs_right = 0.0;
  bool condition_ok = false;
  double eps_ssr = 0.0;      // max of the two lhs distances
  double gamma_bound = 0.0;  // incoherence bound for the left factor
};

SsrReport ssr_bound(const Matrix& p, const Matrix& phat, int r);

// Incoherence any factor satisfying an eps_ssr recovery bound can reach:
// 2 mu_u + 2 eps_ssr^2 m / d, with m taken from uhat.
double incoherence_transfer(const Matrix& uhat, double mu_u, double eps_ssr,
                            int d);

}  // namespace mnar
