#pragma once

#include <cstdint>
#include <vector>

namespace mlpd {

// Counter-based generator (splitmix64): the state is a plain counter stepped
// by a fixed odd increment and the output is a bijective mix of it, so the
// period is 2^64 and any seed gives a usable stream. Chosen over std engines
// because the exact sequence must be reproducible byte-for-byte across builds
// and stdlib distributions are implementation-defined; the algorithm name
// travels inside checkpoints.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  static const char* algorithm_name() { return "splitmix64"; }

  std::uint64_t initial_seed() const { return seed_; }

  std::uint64_t next_u64();

  // Uniform on [0,1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Unbiased integer on [0,n). n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n);

  // Box-Muller, two uniforms per sample (no cached spare, so the draw count
  // per call is fixed and streams stay easy to reason about).
  double gaussian(double mean, double stddev);

  // Deterministic child stream: derived from the parent's seed and the index
  // only, so it does not depend on how much the parent has been consumed.
  Rng split(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

// n gaussian samples; stddev = 0 yields a constant vector of `mean`.
std::vector<double> gaussian(Rng& rng, std::size_t n, double mean,
                             double stddev);

}  // namespace mlpd
