#pragma once

#include <string>

#include "core/image.hpp"
#include "core/rng.hpp"

namespace mlpd {

enum class NoiseKind { awg, salt_pepper, stripe, jpeg_block };

NoiseKind noise_kind_from_string(const std::string& s);
const char* noise_kind_name(NoiseKind k);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::awg;
  double sigma = 25.0;    // awg: additive gaussian stddev in pixel units
  double p = 0.1;         // salt_pepper: per-pixel corruption probability
  double sigma_s = 25.0;  // stripe: stddev of the per-row offset
  int quality = 50;       // jpeg_block: 1..100, higher = milder

  void validate() const;
};

// Corrupts a copy of `img`. Values are not clipped (clipping happens only at
// 8-bit export), so awg output is exactly img + N(0, sigma). jpeg_block is
// deterministic and ignores the rng; the others consume it.
ImageBuffer apply_noise(const ImageBuffer& img, const NoiseSpec& spec,
                        Rng& rng);

}  // namespace mlpd
