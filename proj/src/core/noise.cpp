#include "core/noise.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "core/errors.hpp"

namespace mlpd {

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "awg") return NoiseKind::awg;
  if (s == "salt_pepper" || s == "salt-pepper") return NoiseKind::salt_pepper;
  if (s == "stripe") return NoiseKind::stripe;
  if (s == "jpeg_block" || s == "jpeg") return NoiseKind::jpeg_block;
  throw invalid_argument("unknown noise kind '" + s +
                         "' (want awg|salt_pepper|stripe|jpeg_block)");
}

const char* noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::awg: return "awg";
    case NoiseKind::salt_pepper: return "salt_pepper";
    case NoiseKind::stripe: return "stripe";
    case NoiseKind::jpeg_block: return "jpeg_block";
  }
  return "?";
}

void NoiseSpec::validate() const {
  switch (kind) {
    case NoiseKind::awg:
      if (sigma < 0) throw invalid_argument("noise: sigma must be >= 0");
      break;
    case NoiseKind::salt_pepper:
      if (p < 0 || p > 1)
        throw invalid_argument("noise: p must be in [0,1]");
      break;
    case NoiseKind::stripe:
      if (sigma_s < 0) throw invalid_argument("noise: sigma_s must be >= 0");
      break;
    case NoiseKind::jpeg_block:
      if (quality < 1 || quality > 100)
        throw invalid_argument("noise: quality must be in [1,100]");
      break;
  }
}

namespace {

constexpr int kB = 8;  // JPEG block edge

// JPEG Annex K luminance quantization table.
constexpr std::array<int, 64> kLumaBase = {
    16, 11, 10, 16, 24,  40,  51,  61,  //
    12, 12, 14, 19, 26,  58,  60,  55,  //
    14, 13, 16, 24, 40,  57,  69,  56,  //
    14, 17, 22, 29, 51,  87,  80,  62,  //
    18, 22, 37, 56, 68,  109, 103, 77,  //
    24, 35, 55, 64, 81,  104, 113, 92,  //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99};

std::array<double, 64> scaled_quant_table(int quality) {
  // Classic IJG quality scaling.
  int s = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<double, 64> t{};
  for (int i = 0; i < 64; ++i) {
    int q = (kLumaBase[i] * s + 50) / 100;
    t[i] = static_cast<double>(std::clamp(q, 1, 255));
  }
  return t;
}

struct Dct8 {
  // Orthonormal 8-point DCT-II basis, so the 2D transform is two passes of
  // the same matrix and the inverse is its transpose.
  double m[kB][kB];
  Dct8() {
    for (int u = 0; u < kB; ++u) {
      double cu = u == 0 ? std::sqrt(1.0 / kB) : std::sqrt(2.0 / kB);
      for (int x = 0; x < kB; ++x)
        m[u][x] = cu * std::cos((2 * x + 1) * u * std::numbers::pi / (2 * kB));
    }
  }
};

ImageBuffer jpeg_block_degrade(const ImageBuffer& img, int quality) {
  static const Dct8 dct;
  auto qt = scaled_quant_table(quality);
  ImageBuffer out(img.width, img.height);
  std::size_t bw = (img.width + kB - 1) / kB;
  std::size_t bh = (img.height + kB - 1) / kB;
  auto clamp_r = [&](std::size_t r) { return std::min(r, img.height - 1); };
  auto clamp_c = [&](std::size_t c) { return std::min(c, img.width - 1); };
  double block[kB][kB], tmp[kB][kB];
  for (std::size_t by = 0; by < bh; ++by) {
    for (std::size_t bx = 0; bx < bw; ++bx) {
      // Partial border blocks are filled by edge replication before the
      // transform; only in-image pixels are written back.
      for (int y = 0; y < kB; ++y)
        for (int x = 0; x < kB; ++x)
          block[y][x] =
              img.at(clamp_r(by * kB + y), clamp_c(bx * kB + x)) - 128.0;
      // F = M B M^T
      for (int u = 0; u < kB; ++u)
        for (int x = 0; x < kB; ++x) {
          double acc = 0;
          for (int y = 0; y < kB; ++y) acc += dct.m[u][y] * block[y][x];
          tmp[u][x] = acc;
        }
      for (int u = 0; u < kB; ++u)
        for (int v = 0; v < kB; ++v) {
          double acc = 0;
          for (int x = 0; x < kB; ++x) acc += tmp[u][x] * dct.m[v][x];
          double q = qt[u * kB + v];
          block[u][v] = std::round(acc / q) * q;  // quantize + dequantize
        }
      // B' = M^T F M
      for (int y = 0; y < kB; ++y)
        for (int v = 0; v < kB; ++v) {
          double acc = 0;
          for (int u = 0; u < kB; ++u) acc += dct.m[u][y] * block[u][v];
          tmp[y][v] = acc;
        }
      for (int y = 0; y < kB; ++y)
        for (int x = 0; x < kB; ++x) {
          std::size_t r = by * kB + y, c = bx * kB + x;
          if (r >= img.height || c >= img.width) continue;
          double acc = 0;
          for (int v = 0; v < kB; ++v) acc += tmp[y][v] * dct.m[v][x];
          out.at(r, c) = acc + 128.0;
        }
    }
  }
  return out;
}

}  // namespace

ImageBuffer apply_noise(const ImageBuffer& img, const NoiseSpec& spec,
                        Rng& rng) {
  if (img.data.empty()) throw invalid_argument("apply_noise: empty image");
  spec.validate();
  ImageBuffer out = img;
  switch (spec.kind) {
    case NoiseKind::awg:
      for (auto& v : out.data) v += rng.gaussian(0.0, spec.sigma);
      break;
    case NoiseKind::salt_pepper:
      for (auto& v : out.data) {
        if (rng.uniform() < spec.p) v = rng.uniform() < 0.5 ? 0.0 : 255.0;
      }
      break;
    case NoiseKind::stripe:
      for (std::size_t r = 0; r < out.height; ++r) {
        double offset = rng.gaussian(0.0, spec.sigma_s);
        for (std::size_t c = 0; c < out.width; ++c) out.at(r, c) += offset;
      }
      break;
    case NoiseKind::jpeg_block:
      out = jpeg_block_degrade(img, spec.quality);
      break;
  }
  return out;
}

}  // namespace mlpd
