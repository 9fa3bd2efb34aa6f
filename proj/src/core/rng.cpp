#include "core/rng.hpp"

#include <cmath>
#include <numbers>

#include "core/errors.hpp"

namespace mlpd {

namespace {

// splitmix64 output mix (Vigna's public-domain constants).
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  if (!(lo <= hi)) throw invalid_argument("uniform: lo > hi");
  return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::uniform_below(std::uint64_t n) {
  if (n == 0) throw invalid_argument("uniform_below: n must be > 0");
  // Lemire's multiply-shift with rejection of the biased low slice.
  std::uint64_t x = next_u64();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto lo = static_cast<std::uint64_t>(m);
  if (lo < n) {
    std::uint64_t threshold = -n % n;
    while (lo < threshold) {
      x = next_u64();
      m = static_cast<__uint128_t>(x) * n;
      lo = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::gaussian(double mean, double stddev) {
  if (stddev < 0) throw invalid_argument("gaussian: stddev must be >= 0");
  if (stddev == 0) return mean;
  // u1 shifted into (0,1] so log() stays finite.
  double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::uint64_t index) const {
  return Rng(mix64(seed_ ^ mix64(kGolden * (index + 1))));
}

std::vector<double> gaussian(Rng& rng, std::size_t n, double mean,
                             double stddev) {
  if (stddev < 0) throw invalid_argument("gaussian: stddev must be >= 0");
  std::vector<double> out(n, mean);
  if (stddev > 0) {
    for (auto& v : out) v = rng.gaussian(mean, stddev);
  }
  return out;
}

}  // namespace mlpd
