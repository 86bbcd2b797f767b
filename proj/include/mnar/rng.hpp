#pragma once

#include <cstdint>
#include <vector>

namespace mnar {

// Purpose tags for deriving independent substreams from one experiment seed.
// Values are stable identifiers; reordering them would change all outputs.
enum class Stream : std::uint64_t {
  kSingularValues = 1,
  kRowMembership = 2,
  kColMembership = 3,
  kBlockValues = 4,
  kPermutations = 5,
  kFactors = 6,
  kShift = 7,
  kRowMask = 8,
  kColMask = 9,
  kNoise = 10,
  kRowDraws = 11,
  kColDraws = 12,
  kSourceMask = 13,
  kSourceNoise = 14,
};

// Deterministic, platform-independent 64-bit generator (xoshiro256++),
// seeded through splitmix64. Distribution transforms are fixed here rather
// than taken from <random> so equal seeds give bit-identical streams on any
// platform: uniform doubles use the top 53 bits, normals use Box-Muller
// (cosine branch, one fresh pair per call, no cached spare).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : Rng(seed, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream);
  Rng(std::uint64_t seed, Stream stream)
      : Rng(seed, static_cast<std::uint64_t>(stream)) {}

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double next_double();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; every call consumes exactly two u64s.
  double normal();

  // Uniform on {0, ..., n-1}, unbiased via rejection.
  int uniform_int(int n);

  // In-place Fisher-Yates.
  void shuffle(std::vector<int>& values);

  // Number of u64 draws consumed so far; used by tests to verify that
  // distinct records come from distinct stream positions.
  std::uint64_t position() const { return draws_; }

 private:
  std::uint64_t state_[4];
  std::uint64_t draws_ = 0;
};

}  // namespace mnar
