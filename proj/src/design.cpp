#include "mnar/design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>

#include "mnar/errors.hpp"
#include "mnar/linalg.hpp"

namespace mnar {

namespace {

using nlohmann::json;

constexpr double kSingularTolFactor = 1e-10;

struct GramInverse {
  Matrix inv;
  double log_det = 0.0;
};

// Inverse through the spectral decomposition so near-singular Grams are
// detected scale-invariantly.
GramInverse invert_gram(const Matrix& gram) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  const Vector evals = es.eigenvalues();
  const double largest = evals(evals.size() - 1);
  if (largest <= 0.0 || evals(0) <= kSingularTolFactor * largest) {
    throw RankDeficiencyError(
        "design gram is singular: the design's support does not span R^d");
  }
  GramInverse out;
  out.inv = es.eigenvectors() * evals.cwiseInverse().asDiagonal() *
            es.eigenvectors().transpose();
  out.log_det = evals.array().log().sum();
  return out;
}

double max_score(const Matrix& vectors, const Matrix& gram_inv,
                 Eigen::Index* argmax = nullptr) {
  // Row-wise quadratic forms a_i^T Vinv a_i in one pass.
  const Vector scores =
      ((vectors * gram_inv).cwiseProduct(vectors)).rowwise().sum();
  Eigen::Index idx = 0;
  const double best = scores.maxCoeff(&idx);
  if (argmax) *argmax = idx;
  return best;
}

void check_design(const Design& design, Eigen::Index n) {
  if (static_cast<Eigen::Index>(design.weights.size()) != n) {
    throw DimensionError("design size does not match the vector set");
  }
  double sum = 0.0;
  for (double w : design.weights) {
    if (!(w >= 0.0)) throw ParameterError("design weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ParameterError("design weights sum to " + std::to_string(sum));
  }
}

// Greedy pivoted selection of d rows spanning R^d: repeatedly take the row
// with the largest residual after projecting out the chosen ones.
std::vector<int> spanning_subset(const Matrix& vectors) {
  const Eigen::Index d = vectors.cols();
  Matrix residual = vectors;
  std::vector<int> chosen;
  for (Eigen::Index k = 0; k < d; ++k) {
    Eigen::Index best = 0;
    const double norm = residual.rowwise().norm().maxCoeff(&best);
    if (norm <= 1e-12) {
      throw RankDeficiencyError(
          "frank_wolfe_design: vectors do not span R^d (rank " +
          std::to_string(k) + " of " + std::to_string(d) + ")");
    }
    chosen.push_back(static_cast<int>(best));
    const Vector dir = residual.row(best).transpose() / norm;
    residual -= (residual * dir) * dir.transpose();
  }
  return chosen;
}

}  // namespace

std::vector<int> Design::support() const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > kSupportTol) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

Matrix design_gram(const Design& design, const Matrix& vectors) {
  check_design(design, vectors.rows());
  const Eigen::Index d = vectors.cols();
  Matrix gram = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < design.weights.size(); ++i) {
    const double w = design.weights[i];
    if (w == 0.0) continue;
    const auto a = vectors.row(static_cast<Eigen::Index>(i));
    gram.noalias() += w * a.transpose() * a;
  }
  return gram;
}

double g_value(const Design& design, const Matrix& vectors) {
  const GramInverse gi = invert_gram(design_gram(design, vectors));
  return max_score(vectors, gi.inv);
}

Design frank_wolfe_design(const Matrix& vectors, double eps, int max_iter) {
  return frank_wolfe_design(vectors, FrankWolfeOptions{eps, max_iter, true});
}

Design frank_wolfe_design(const Matrix& vectors,
                          const FrankWolfeOptions& options) {
  if (!(options.eps > 0.0)) {
    throw ParameterError("frank_wolfe_design: eps must be positive");
  }
  if (options.max_iter < 1) {
    throw ParameterError("frank_wolfe_design: max_iter must be positive");
  }
  const Eigen::Index n = vectors.rows();
  const double d = static_cast<double>(vectors.cols());
  const double target = (1.0 + options.eps) * d;

  Design design;
  design.weights.assign(static_cast<std::size_t>(n), 0.0);
  const std::vector<int> init = spanning_subset(vectors);
  for (int idx : init) {
    design.weights[static_cast<std::size_t>(idx)] = 1.0 / init.size();
  }

  int iterations_left = options.max_iter;
  auto iterate_until_certified = [&](Design& current) {
    double g = 0.0;
    while (iterations_left-- > 0) {
      const GramInverse gi = invert_gram(design_gram(current, vectors));
      if (options.log_det_trace) options.log_det_trace->push_back(gi.log_det);
      Eigen::Index star = 0;
      g = max_score(vectors, gi.inv, &star);
      if (g <= target) return;
      const double gamma = (g / d - 1.0) / (g - 1.0);
      for (double& w : current.weights) w *= 1.0 - gamma;
      current.weights[static_cast<std::size_t>(star)] += gamma;
    }
    throw ConvergenceError(
        "frank_wolfe_design: no certificate after " +
        std::to_string(options.max_iter) + " iterations (g = " +
        std::to_string(g) + ", target " + std::to_string(target) + ")");
  };

  // Drop numerically-zero atoms so sampling never wastes budget on them.
  // Kept only when the renormalization does not cost the certificate.
  auto zero_tiny = [&](Design& current) {
    Design cleaned = current;
    double total = 0.0;
    for (double& w : cleaned.weights) {
      if (w <= Design::kSupportTol) w = 0.0;
      total += w;
    }
    for (double& w : cleaned.weights) w /= total;
    if (g_value(cleaned, vectors) <= target) current = cleaned;
  };

  // Greedily remove the lightest atoms while g stays below `bound`.
  auto prune_to = [&](Design& current, double bound) {
    bool changed = true;
    while (changed) {
      changed = false;
      std::vector<int> support = current.support();
      std::sort(support.begin(), support.end(), [&](int a, int b) {
        return current.weights[static_cast<std::size_t>(a)] <
               current.weights[static_cast<std::size_t>(b)];
      });
      for (int idx : support) {
        const double w = current.weights[static_cast<std::size_t>(idx)];
        if (w >= 1.0) continue;
        Design trial = current;
        trial.weights[static_cast<std::size_t>(idx)] = 0.0;
        for (double& x : trial.weights) x /= 1.0 - w;
        try {
          if (g_value(trial, vectors) <= bound) {
            current = trial;
            changed = true;
            break;
          }
        } catch (const RankDeficiencyError&) {
          // Removal breaks the span; keep the atom.
        }
      }
    }
  };

  iterate_until_certified(design);
  zero_tiny(design);

  if (options.prune) {
    // Shrink the support against the relaxed bound, then re-run the main
    // loop so the returned design still carries the strict certificate.
    const Design certified = design;
    prune_to(design, (1.0 + 2.0 * options.eps) * d);
    if (g_value(design, vectors) > target) {
      try {
        iterate_until_certified(design);
        zero_tiny(design);
      } catch (const ConvergenceError&) {
        design = certified;
      }
    }
    prune_to(design, target);
  }
  return design;
}

Design tensor_design(const Design& rho, const Design& zeta, int m, int n) {
  if (static_cast<int>(rho.weights.size()) != m ||
      static_cast<int>(zeta.weights.size()) != n) {
    throw DimensionError("tensor_design: sizes do not match m, n");
  }
  Design joint;
  joint.weights.assign(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double wi = rho.weights[static_cast<std::size_t>(i)];
    if (wi == 0.0) continue;
    for (int j = 0; j < n; ++j) {
      joint.weights[static_cast<std::size_t>(i) * n + j] =
          wi * zeta.weights[static_cast<std::size_t>(j)];
    }
  }
  return joint;
}

KwCertificate kw_certificate(const Design& design, const Matrix& vectors) {
  KwCertificate cert;
  cert.g = g_value(design, vectors);
  cert.eps_hat = cert.g / static_cast<double>(vectors.cols()) - 1.0;
  return cert;
}

Matrix kron_feature_rows(const Matrix& u, const Matrix& v) {
  const Eigen::Index m = u.rows();
  const Eigen::Index n = v.rows();
  const Eigen::Index du = u.cols();
  const Eigen::Index dv = v.cols();
  Matrix out(m * n, du * dv);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      // Row = v_j kron u_i, consistent with vec(u_i x v_j^T).
      for (Eigen::Index b = 0; b < dv; ++b) {
        for (Eigen::Index a = 0; a < du; ++a) {
          out(i * n + j, b * du + a) = v(j, b) * u(i, a);
        }
      }
    }
  }
  return out;
}

void save_design(const Design& design, const Matrix& vectors,
                 const std::string& path) {
  const KwCertificate cert = kw_certificate(design, vectors);
  const std::vector<int> support = design.support();
  std::vector<double> weights;
  weights.reserve(support.size());
  for (int idx : support) {
    weights.push_back(design.weights[static_cast<std::size_t>(idx)]);
  }
  json out{{"indices", support},
           {"weights", weights},
           {"g_value", cert.g},
           {"eps_hat", cert.eps_hat}};
  std::ofstream file(path);
  if (!file) throw IoError("cannot open for writing: " + path);
  file << out.dump(2) << '\n';
}

Design load_design(const std::string& path, int n_vectors) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open for reading: " + path);
  json in;
  try {
    file >> in;
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  const auto indices = in.at("indices").get<std::vector<int>>();
  const auto weights = in.at("weights").get<std::vector<double>>();
  if (indices.size() != weights.size()) {
    throw IoError(path + ": indices and weights differ in length");
  }
  Design design;
  design.weights.assign(static_cast<std::size_t>(n_vectors), 0.0);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < 0 || indices[k] >= n_vectors) {
      throw IoError(path + ": index out of range");
    }
    design.weights[static_cast<std::size_t>(indices[k])] = weights[k];
  }
  return design;
}

}  // namespace mnar
