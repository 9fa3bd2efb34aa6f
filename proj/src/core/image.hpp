#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace mlpd {

// Grayscale image held as doubles so noise and network outputs can live
// outside [0,255]; values are only clipped and rounded when written to disk.
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> data;  // row-major, height * width

  ImageBuffer() = default;
  ImageBuffer(std::size_t w, std::size_t h)
      : width(w), height(h), data(w * h, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * width + c]; }
};

// Pixel <-> network units. 0..255 maps to -0.5..0.5.
inline double normalize_pixel(double v) { return (v - 127.5) / 255.0; }
inline double denormalize_pixel(double n) { return n * 255.0 + 127.5; }

// 10*log10(255^2 / MSE); identical images give +infinity.
double psnr(const ImageBuffer& reference, const ImageBuffer& estimate);

// Reads binary PGM (P5), PPM (P6, converted via BT.601 luma) or PNG (gray or
// color, color converted via BT.601 luma). Format detected from content.
ImageBuffer load_image(const std::filesystem::path& path);

// Writes 8-bit grayscale PGM or PNG, chosen by file extension (.pgm default).
// Values are clipped to [0,255] and rounded here and only here.
void save_image(const ImageBuffer& img, const std::filesystem::path& path);

// Pads by reflecting across the border without repeating the edge pixel
// (avoids flat/dark frames in the padded band).
ImageBuffer mirror_pad(const ImageBuffer& img, std::size_t pad);

// Grid of square patches, each scaled independently to span 0..255; flat
// patches and unused trailing cells render mid-gray, separators are `pad`
// pixels of mid-gray. Patch values are arbitrary reals (weights, activations).
ImageBuffer render_montage(const std::vector<std::vector<double>>& patches,
                           std::size_t edge, std::size_t cols,
                           std::size_t pad = 1);

}  // namespace mlpd
