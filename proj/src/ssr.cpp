#include "mnar/ssr.hpp"

#include <cmath>

#include "mnar/errors.hpp"
#include "mnar/linalg.hpp"

namespace mnar {

SsrReport ssr_bound(const Matrix& p, const Matrix& phat, int r) {
  if (p.rows() != phat.rows() || p.cols() != phat.cols()) {
    throw DimensionError("ssr_bound: shape mismatch");
  }
  const SvdTriple truth = rank_d_svd(p, r);
  const double sigma_r = truth.sigma(r - 1);
  if (sigma_r <= 1e-12 * std::max(truth.sigma(0), 1.0)) {
    throw RankDeficiencyError("ssr_bound: sigma_r(P) is numerically zero");
  }
  const SvdTriple est = rank_d_svd(phat, r);

  const double m = static_cast<double>(p.rows());
  const double n = static_cast<double>(p.cols());
  const double err_max = norm_max(p - phat);
  const double root_mn = std::sqrt(m * n);
  const double c = 2.0 + std::sqrt(2.0);

  SsrReport report;
  report.lhs_left = procrustes_align(truth.U, est.U).dist;
  report.lhs_right = procrustes_align(truth.V, est.V).dist;
  // ||U U^T||_{2->inf} equals the largest row norm of U for orthonormal U.
  report.rhs_left = (2.0 * std::sqrt(n) + c * root_mn * norm_two_to_inf(truth.U)) *
                    err_max / sigma_r;
  report.rhs_right = (2.0 * std::sqrt(m) + c * root_mn * norm_two_to_inf(truth.V)) *
                     err_max / sigma_r;
  report.condition_ok = root_mn * err_max <= sigma_r / 2.0;
  report.eps_ssr = std::max(report.lhs_left, report.lhs_right);

  const double mu_u =
      m * norm_two_to_inf(truth.U) * norm_two_to_inf(truth.U) / r;
  report.gamma_bound = incoherence_transfer(est.U, mu_u, report.eps_ssr, r);
  return report;
}

double incoherence_transfer(const Matrix& uhat, double mu_u, double eps_ssr,
                            int d) {
  if (eps_ssr < 0.0) {
    throw ParameterError("incoherence_transfer: eps_ssr must be nonnegative");
  }
  const double m = static_cast<double>(uhat.rows());
  return 2.0 * mu_u + 2.0 * eps_ssr * eps_ssr * m / static_cast<double>(d);
}

}  // namespace mnar
