#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "mnar/errors.hpp"
#include "mnar/linalg.hpp"
#include "mnar/sampling.hpp"
#include "test_util.hpp"

using namespace mnar;
using namespace mnar::testutil;

TEST_CASE("passive mask edges: all kept, none kept") {
  const RowColMask full = passive_mask(6, 7, 1.0, 1.0, 1);
  CHECK(std::accumulate(full.eta.begin(), full.eta.end(), 0) == 6);
  CHECK(std::accumulate(full.nu.begin(), full.nu.end(), 0) == 7);

  const RowColMask none = passive_mask(6, 7, 0.0, 1.0, 1);
  CHECK(std::accumulate(none.eta.begin(), none.eta.end(), 0) == 0);
}

TEST_CASE("passive mask frequencies concentrate") {
  // Binomial(10000, 0.5): the 0.02 band is 4 sigma on the sample mean.
  const RowColMask mask = passive_mask(10000, 10, 0.5, 0.5, 2);
  const double mean =
      std::accumulate(mask.eta.begin(), mask.eta.end(), 0.0) / 10000.0;
  CHECK(mean > 0.48);
  CHECK(mean < 0.52);
}

TEST_CASE("passive observation matches the eta-nu outer product exactly") {
  const Matrix q = gaussian(15, 12, 3);
  const RowColMask mask = passive_mask(15, 12, 0.6, 0.5, 4);
  const ObservationSet obs = observe_passive(q, mask, 0.3, 5);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      const bool expect = mask.eta[static_cast<std::size_t>(i)] &&
                          mask.nu[static_cast<std::size_t>(j)];
      CHECK(!is_missing(obs.masked(i, j)) == expect);
    }
  }
}

TEST_CASE("noiseless full passive observation is the matrix itself") {
  const Matrix q = gaussian(9, 8, 6);
  const ObservationSet obs =
      observe_passive(q, passive_mask(9, 8, 1.0, 1.0, 7), 0.0, 8);
  CHECK(norm_max(obs.masked - q) == 0.0);

  const ObservationSet empty =
      observe_passive(q, passive_mask(9, 8, 0.0, 0.0, 7), 0.0, 8);
  CHECK(observed_fraction(empty.masked) == 0.0);
}

TEST_CASE("passive noise has the configured scale") {
  const Matrix q = Matrix::Zero(100, 100);
  const ObservationSet obs =
      observe_passive(q, passive_mask(100, 100, 1.0, 1.0, 9), 0.1, 10);
  const double var = obs.masked.squaredNorm() / 10000.0;
  const double std_dev = std::sqrt(var);
  CHECK(std_dev > 0.08);
  CHECK(std_dev < 0.12);
}

TEST_CASE("passive observation rejects negative noise levels") {
  const Matrix q = Matrix::Zero(4, 4);
  CHECK_THROWS_AS(observe_passive(q, passive_mask(4, 4, 1.0, 1.0, 1), -0.1, 2),
                  ParameterError);
}

TEST_CASE("active draws from point masses hit only that atom") {
  std::vector<double> rho(10, 0.0), zeta(8, 0.0);
  rho[3] = 1.0;
  zeta[5] = 1.0;
  const ActiveSample sample = active_draw(rho, zeta, 20, 7, 11);
  CHECK(sample.row_mult[3] == 20);
  CHECK(sample.col_mult[5] == 7);
  CHECK(std::accumulate(sample.row_mult.begin(), sample.row_mult.end(), 0) == 20);
  CHECK(std::accumulate(sample.col_mult.begin(), sample.col_mult.end(), 0) == 7);
}

TEST_CASE("active draws from the uniform design are balanced") {
  // Binomial(40000, 1/4) has sd ~ 87, so 600 is a ~7 sigma band.
  const std::vector<double> rho(4, 0.25);
  const std::vector<double> zeta = {1.0};
  const ActiveSample sample = active_draw(rho, zeta, 40000, 1, 12);
  for (int i = 0; i < 4; ++i) {
    CHECK(sample.row_mult[static_cast<std::size_t>(i)] > 9400);
    CHECK(sample.row_mult[static_cast<std::size_t>(i)] < 10600);
  }
}

TEST_CASE("active draw validates its design vectors") {
  CHECK_THROWS_AS(active_draw({0.5, 0.4}, {1.0}, 5, 5, 1), ParameterError);
  CHECK_THROWS_AS(active_draw({1.2, -0.2}, {1.0}, 5, 5, 1), ParameterError);
  CHECK_THROWS_AS(active_draw({1.0}, {1.0}, 0, 5, 1), ParameterError);
}

TEST_CASE("active observation produces one record per repeat") {
  Matrix q(3, 3);
  q << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  ActiveSample sample;
  sample.t_row = 3;
  sample.t_col = 1;
  sample.row_mult = {3, 0, 0};
  sample.col_mult = {0, 1, 0};
  const ObservationSet obs = observe_active(q, sample, 0.5, 13);
  REQUIRE(obs.records.size() == 3);
  for (int t = 0; t < 3; ++t) {
    CHECK(obs.records[static_cast<std::size_t>(t)].i == 0);
    CHECK(obs.records[static_cast<std::size_t>(t)].j == 1);
    CHECK(obs.records[static_cast<std::size_t>(t)].t == t + 1);
  }
  CHECK(obs.records[0].value != obs.records[1].value);
  CHECK(obs.records[1].value != obs.records[2].value);
}

TEST_CASE("noiseless active records equal the matrix entries") {
  const Matrix q = gaussian(5, 6, 14);
  std::vector<double> rho(5, 0.2), zeta(6, 1.0 / 6.0);
  const ActiveSample sample = active_draw(rho, zeta, 12, 12, 15);
  const ObservationSet obs = observe_active(q, sample, 0.0, 16);
  std::size_t expected = 0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 6; ++j) {
      expected += static_cast<std::size_t>(sample.count(i, j));
    }
  }
  CHECK(obs.records.size() == expected);
  for (const auto& rec : obs.records) {
    CHECK(rec.value == q(rec.i, rec.j));
  }
}

TEST_CASE("repeated active measurements average to the cell value") {
  Matrix q(2, 2);
  q << 0.7, -0.3, 0.1, 0.9;
  ActiveSample sample;
  sample.t_row = 100;
  sample.t_col = 100;
  sample.row_mult = {100, 0};
  sample.col_mult = {100, 0};
  const ObservationSet obs = observe_active(q, sample, 0.1, 17);
  REQUIRE(obs.records.size() == 10000);
  double mean = 0.0;
  for (const auto& rec : obs.records) mean += rec.value;
  mean /= 10000.0;
  // CLT at 4 sigma: 0.1 / sqrt(10000) * 4 = 0.004.
  CHECK(std::abs(mean - 0.7) <= 0.004);
}

TEST_CASE("noise records consume distinct, sequential stream positions") {
  const Matrix q = gaussian(4, 5, 18);
  ActiveSample sample;
  sample.t_row = 4;
  sample.t_col = 3;
  sample.row_mult = {2, 0, 1, 1};
  sample.col_mult = {1, 2, 0, 0, 0};
  const double sigma = 0.25;
  const ObservationSet obs = observe_active(q, sample, sigma, 19);

  // Replay the noise stream: records appear in (i, j, t) order, each
  // consuming exactly one normal (two u64 draws).
  Rng replay(19, Stream::kNoise);
  for (const auto& rec : obs.records) {
    const std::uint64_t before = replay.position();
    const double expect = q(rec.i, rec.j) + sigma * replay.normal();
    CHECK(rec.value == expect);
    CHECK(replay.position() == before + 2);
  }
}

TEST_CASE("sampling operations are deterministic in the seed") {
  const Matrix q = gaussian(10, 10, 20);
  const auto obs1 = observe_passive(q, passive_mask(10, 10, 0.5, 0.5, 21), 0.2, 22);
  const auto obs2 = observe_passive(q, passive_mask(10, 10, 0.5, 0.5, 21), 0.2, 22);
  for (Eigen::Index i = 0; i < 10; ++i) {
    for (Eigen::Index j = 0; j < 10; ++j) {
      const bool m1 = is_missing(obs1.masked(i, j));
      const bool m2 = is_missing(obs2.masked(i, j));
      CHECK(m1 == m2);
      if (!m1) CHECK(obs1.masked(i, j) == obs2.masked(i, j));
    }
  }
}

TEST_CASE("nondegeneracy holds for full masks and fails for empty ones") {
  const Matrix u = random_orthonormal(50, 3, 23);
  const std::vector<std::uint8_t> full(50, 1);
  const std::vector<std::uint8_t> empty(50, 0);
  CHECK(nondegeneracy_check(full, u, 1.0));
  CHECK_FALSE(nondegeneracy_check(empty, u, 0.5));
  CHECK_THROWS_AS(nondegeneracy_check(full, u, 0.0), ParameterError);
}

TEST_CASE("nondegeneracy holds for most random masks of incoherent factors") {
  const Matrix u = flat_orthonormal(500, 5);
  REQUIRE(orthonormality_defect(u) < 1e-12);
  int pass = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng(3000 + trial);
    std::vector<std::uint8_t> mask(500);
    for (auto& bit : mask) bit = rng.next_double() < 0.5 ? 1 : 0;
    if (nondegeneracy_check(mask, u, 0.5)) ++pass;
  }
  CHECK(pass >= 180);
}

TEST_CASE("source MCAR masking keeps the right fraction with the right noise") {
  const Matrix p = gaussian(200, 200, 25);
  CHECK(norm_max(mask_source_mcar(p, 1.0, 0.0, 26) - p) == 0.0);

  const Matrix noisy = mask_source_mcar(Matrix(Matrix::Zero(100, 100)), 1.0, 0.1, 27);
  const double std_dev = std::sqrt(noisy.squaredNorm() / 10000.0);
  CHECK(std_dev > 0.08);
  CHECK(std_dev < 0.12);

  const Matrix half = mask_source_mcar(p, 0.5, 0.0, 28);
  const double frac = observed_fraction(half);
  CHECK(frac > 0.48);
  CHECK(frac < 0.52);

  CHECK_THROWS_AS(mask_source_mcar(p, 0.0, 0.1, 29), ParameterError);
}

TEST_CASE("observation sets round-trip through their file formats") {
  const Matrix q = gaussian(6, 5, 30);

  const ObservationSet passive =
      observe_passive(q, passive_mask(6, 5, 0.6, 0.6, 31), 0.1, 32);
  save_observations(passive, "obs_passive_tmp.csv");
  const ObservationSet passive_back = load_observations("obs_passive_tmp.csv");
  CHECK(passive_back.kind == ObservationSet::Kind::kPassive);
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) {
      if (is_missing(passive.masked(i, j))) {
        CHECK(is_missing(passive_back.masked(i, j)));
      } else {
        CHECK(passive_back.masked(i, j) == passive.masked(i, j));
      }
    }
  }

  std::vector<double> rho(6, 1.0 / 6.0), zeta(5, 0.2);
  const ActiveSample sample = active_draw(rho, zeta, 9, 7, 33);
  const ObservationSet active = observe_active(q, sample, 0.1, 34);
  save_observations(active, "obs_active_tmp.csv");
  const ObservationSet active_back = load_observations("obs_active_tmp.csv");
  CHECK(active_back.kind == ObservationSet::Kind::kActive);
  REQUIRE(active_back.records.size() == active.records.size());
  for (std::size_t k = 0; k < active.records.size(); ++k) {
    CHECK(active_back.records[k].i == active.records[k].i);
    CHECK(active_back.records[k].j == active.records[k].j);
    CHECK(active_back.records[k].t == active.records[k].t);
    CHECK(active_back.records[k].value == active.records[k].value);
  }
  CHECK(active_back.sample.row_mult == active.sample.row_mult);
  CHECK(active_back.sample.col_mult == active.sample.col_mult);

  std::filesystem::remove("obs_passive_tmp.csv");
  std::filesystem::remove("obs_active_tmp.csv");
  std::filesystem::remove("obs_active_tmp.csv.meta.json");
}
