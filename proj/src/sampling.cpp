#include "mnar/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mnar/errors.hpp"
#include "mnar/linalg.hpp"
#include "mnar/rng.hpp"

namespace mnar {

namespace {

using nlohmann::json;

void check_probability(double p, const std::string& name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError(name + " must lie in [0, 1]");
  }
}

std::vector<std::uint8_t> bernoulli_vector(int len, double p, Rng& rng) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(len));
  for (auto& bit : out) bit = rng.next_double() < p ? 1 : 0;
  return out;
}

void check_design_vector(const std::vector<double>& w, const std::string& name) {
  if (w.empty()) throw ParameterError(name + ": empty design");
  double sum = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw ParameterError(name + ": negative weight");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ParameterError(name + ": weights sum to " + std::to_string(sum) +
                         ", expected 1");
  }
}

// Inverse-CDF draw; one uniform per sample.
int draw_index(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.next_double() * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(
      it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

std::vector<double> cumulative(const std::vector<double>& w) {
  std::vector<double> cdf(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    cdf[i] = acc;
  }
  return cdf;
}

}  // namespace

RowColMask passive_mask(int m, int n, double p_row, double p_col,
                        std::uint64_t seed) {
  check_probability(p_row, "p_row");
  check_probability(p_col, "p_col");
  RowColMask mask;
  mask.p_row = p_row;
  mask.p_col = p_col;
  Rng row_rng(seed, Stream::kRowMask);
  Rng col_rng(seed, Stream::kColMask);
  mask.eta = bernoulli_vector(m, p_row, row_rng);
  mask.nu = bernoulli_vector(n, p_col, col_rng);
  return mask;
}

ObservationSet observe_passive(const Matrix& q, const RowColMask& mask,
                               double sigma_q, std::uint64_t seed) {
  if (static_cast<Eigen::Index>(mask.eta.size()) != q.rows() ||
      static_cast<Eigen::Index>(mask.nu.size()) != q.cols()) {
    throw DimensionError("observe_passive: mask does not match matrix shape");
  }
  if (sigma_q < 0.0) throw ParameterError("sigma_q must be nonnegative");

  ObservationSet obs;
  obs.kind = ObservationSet::Kind::kPassive;
  obs.mask = mask;
  obs.masked = Matrix::Constant(q.rows(), q.cols(),
                                std::numeric_limits<double>::quiet_NaN());
  Rng noise(seed, Stream::kNoise);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    if (!mask.eta[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      if (!mask.nu[static_cast<std::size_t>(j)]) continue;
      obs.masked(i, j) = q(i, j) + (sigma_q > 0.0 ? sigma_q * noise.normal() : 0.0);
    }
  }
  return obs;
}

ActiveSample active_draw(const std::vector<double>& rho,
                         const std::vector<double>& zeta, int t_row, int t_col,
                         std::uint64_t seed) {
  check_design_vector(rho, "rho");
  check_design_vector(zeta, "zeta");
  if (t_row < 1 || t_col < 1) {
    throw ParameterError("active_draw: budgets must be at least 1");
  }

  ActiveSample sample;
  sample.t_row = t_row;
  sample.t_col = t_col;
  sample.row_mult.assign(rho.size(), 0);
  sample.col_mult.assign(zeta.size(), 0);

  const std::vector<double> row_cdf = cumulative(rho);
  const std::vector<double> col_cdf = cumulative(zeta);
  Rng row_rng(seed, Stream::kRowDraws);
  Rng col_rng(seed, Stream::kColDraws);
  for (int t = 0; t < t_row; ++t) {
    ++sample.row_mult[static_cast<std::size_t>(draw_index(row_cdf, row_rng))];
  }
  for (int t = 0; t < t_col; ++t) {
    ++sample.col_mult[static_cast<std::size_t>(draw_index(col_cdf, col_rng))];
  }
  return sample;
}

ObservationSet observe_active(const Matrix& q, const ActiveSample& sample,
                              double sigma_q, std::uint64_t seed) {
  if (static_cast<Eigen::Index>(sample.row_mult.size()) != q.rows() ||
      static_cast<Eigen::Index>(sample.col_mult.size()) != q.cols()) {
    throw DimensionError("observe_active: sample does not match matrix shape");
  }
  if (sigma_q < 0.0) throw ParameterError("sigma_q must be nonnegative");

  ObservationSet obs;
  obs.kind = ObservationSet::Kind::kActive;
  obs.sample = sample;
  Rng noise(seed, Stream::kNoise);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const int ri = sample.row_mult[static_cast<std::size_t>(i)];
    if (ri == 0) continue;
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      const int n_ij = ri * sample.col_mult[static_cast<std::size_t>(j)];
      for (int t = 1; t <= n_ij; ++t) {
        obs.records.push_back(
            {static_cast<int>(i), static_cast<int>(j), t,
             q(i, j) + (sigma_q > 0.0 ? sigma_q * noise.normal() : 0.0)});
      }
    }
  }
  return obs;
}

bool nondegeneracy_check(const std::vector<std::uint8_t>& mask_vec,
                         const Matrix& u, double p) {
  if (static_cast<Eigen::Index>(mask_vec.size()) != u.rows()) {
    throw DimensionError("nondegeneracy_check: mask length != rows(U)");
  }
  if (!(p > 0.0 && p <= 1.0)) {
    throw ParameterError("nondegeneracy_check: p must lie in (0, 1]");
  }
  Matrix du = u;
  for (Eigen::Index i = 0; i < du.rows(); ++i) {
    if (!mask_vec[static_cast<std::size_t>(i)]) du.row(i).setZero();
  }
  const double root_p = std::sqrt(p);
  return std::abs(norm_op(du) - root_p) <= root_p / 10.0;
}

Matrix mask_source_mcar(const Matrix& p_mat, double p, double sigma_p,
                        std::uint64_t seed) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ParameterError("mask_source_mcar: p must lie in (0, 1]");
  }
  if (sigma_p < 0.0) throw ParameterError("sigma_p must be nonnegative");

  Matrix out = Matrix::Constant(p_mat.rows(), p_mat.cols(),
                                std::numeric_limits<double>::quiet_NaN());
  Rng keep(seed, Stream::kSourceMask);
  Rng noise(seed, Stream::kSourceNoise);
  for (Eigen::Index i = 0; i < p_mat.rows(); ++i) {
    for (Eigen::Index j = 0; j < p_mat.cols(); ++j) {
      if (p >= 1.0 || keep.next_double() < p) {
        out(i, j) =
            p_mat(i, j) + (sigma_p > 0.0 ? sigma_p * noise.normal() : 0.0);
      }
    }
  }
  return out;
}

void save_observations(const ObservationSet& obs, const std::string& path) {
  if (obs.kind == ObservationSet::Kind::kPassive) {
    write_csv(obs.masked, path);
    return;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  char buf[40];
  for (const auto& rec : obs.records) {
    std::snprintf(buf, sizeof(buf), "%.17g", rec.value);
    out << rec.i << ',' << rec.j << ',' << rec.t << ',' << buf << '\n';
  }
  json sidecar{{"T_row", obs.sample.t_row},
               {"T_col", obs.sample.t_col},
               {"row_mults", obs.sample.row_mult},
               {"col_mults", obs.sample.col_mult}};
  std::ofstream meta(path + ".meta.json");
  if (!meta) throw IoError("cannot open for writing: " + path + ".meta.json");
  meta << sidecar.dump(2) << '\n';
}

ObservationSet load_observations(const std::string& path) {
  ObservationSet obs;
  const std::string meta_path = path + ".meta.json";
  if (!std::filesystem::exists(meta_path)) {
    obs.kind = ObservationSet::Kind::kPassive;
    obs.masked = read_csv(path);
    obs.mask.eta.assign(static_cast<std::size_t>(obs.masked.rows()), 0);
    obs.mask.nu.assign(static_cast<std::size_t>(obs.masked.cols()), 0);
    // Recover the row/column indicators from the missingness pattern.
    for (Eigen::Index i = 0; i < obs.masked.rows(); ++i) {
      for (Eigen::Index j = 0; j < obs.masked.cols(); ++j) {
        if (!is_missing(obs.masked(i, j))) {
          obs.mask.eta[static_cast<std::size_t>(i)] = 1;
          obs.mask.nu[static_cast<std::size_t>(j)] = 1;
        }
      }
    }
    return obs;
  }

  obs.kind = ObservationSet::Kind::kActive;
  std::ifstream meta(meta_path);
  json sidecar;
  try {
    meta >> sidecar;
  } catch (const json::exception& e) {
    throw IoError(meta_path + ": " + e.what());
  }
  obs.sample.t_row = sidecar.at("T_row").get<int>();
  obs.sample.t_col = sidecar.at("T_col").get<int>();
  obs.sample.row_mult = sidecar.at("row_mults").get<std::vector<int>>();
  obs.sample.col_mult = sidecar.at("col_mults").get<std::vector<int>>();

  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    ActiveRecord rec;
    char comma = ',';
    if (!(ss >> rec.i >> comma >> rec.j >> comma >> rec.t >> comma >>
          rec.value)) {
      throw IoError(path + ": malformed record line '" + line + "'");
    }
    obs.records.push_back(rec);
  }
  return obs;
}

}  // namespace mnar
